#include "crsfd/gridpeg.hpp"

#include <deque>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "crsfd/rng.hpp"

namespace crsfd {

namespace {

constexpr int kDx[kGridActions] = {0, 0, -1, 1, 0};
constexpr int kDy[kGridActions] = {-1, 1, 0, 0, 0};

// Lateral slip directions for each move action (insert never slips).
constexpr int kLat1[4] = {kLeft, kLeft, kUp, kUp};
constexpr int kLat2[4] = {kRight, kRight, kDown, kDown};

int move_target(const GridPegSpec& spec, int x, int y, int dir, int dx, int dy) {
  const int nx = x + kDx[dir];
  const int ny = y + kDy[dir];
  if (!spec.in_bounds(nx, ny) || spec.is_wall(nx, ny, dx, dy)) return spec.cell(x, y);
  return spec.cell(nx, ny);
}

// Goal reachable from every free cell <=> BFS from the goal over free cells
// covers them all (moves are symmetric).
bool goal_reaches_all_free(const GridPegSpec& spec, int dx, int dy) {
  const int S = spec.n_states();
  std::vector<char> free_cell(S, 0), seen(S, 0);
  int n_free = 0;
  for (int y = 0; y < spec.height; ++y)
    for (int x = 0; x < spec.width; ++x)
      if (!spec.is_wall(x, y, dx, dy)) {
        free_cell[spec.cell(x, y)] = 1;
        ++n_free;
      }
  const int goal = spec.cell(spec.goal_x(dx), spec.goal_y(dy));
  if (!free_cell[goal]) return false;
  std::deque<int> queue{goal};
  seen[goal] = 1;
  int n_seen = 1;
  while (!queue.empty()) {
    const int c = queue.front();
    queue.pop_front();
    const int x = c % spec.width, y = c / spec.width;
    for (int dir = 0; dir < 4; ++dir) {
      const int nx = x + kDx[dir], ny = y + kDy[dir];
      if (!spec.in_bounds(nx, ny)) continue;
      const int nc = spec.cell(nx, ny);
      if (!free_cell[nc] || seen[nc]) continue;
      seen[nc] = 1;
      ++n_seen;
      queue.push_back(nc);
    }
  }
  return n_seen == n_free;
}

}  // namespace

void ShapeMask::validate() const {
  if (id.empty()) throw std::invalid_argument("ShapeMask: empty id");
  for (const auto& row : rows) {
    if (row.size() != kShapeSize)
      throw std::invalid_argument("ShapeMask: each row must have 5 characters");
    for (char c : row)
      if (c != '#' && c != '.')
        throw std::invalid_argument("ShapeMask: rows may contain only '#' and '.'");
  }
  if (wall(kShapeSize / 2, kShapeSize / 2))
    throw std::invalid_argument("ShapeMask: center (goal) cell must be free");
}

ShapeMask parse_shape(const std::string& id, const std::vector<std::string>& lines) {
  if (lines.size() != kShapeSize)
    throw std::invalid_argument("parse_shape: expected exactly 5 rows");
  ShapeMask mask;
  mask.id = id;
  for (int i = 0; i < kShapeSize; ++i) mask.rows[i] = lines[i];
  mask.validate();
  return mask;
}

ShapeMask load_shape(const std::string& shapes_dir, const std::string& id) {
  const std::string path = shapes_dir + "/" + id + ".txt";
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_shape: cannot open " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) lines.push_back(line);
  }
  return parse_shape(id, lines);
}

bool GridPegSpec::is_wall(int x, int y, int dx, int dy) const {
  const int mx = x - (anchor_x + dx);
  const int my = y - (anchor_y + dy);
  if (mx < 0 || mx >= kShapeSize || my < 0 || my >= kShapeSize) return false;
  return shape.wall(mx, my);
}

std::vector<int> GridPegSpec::free_cells() const {
  std::vector<int> out;
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x)
      if (!is_wall(x, y)) out.push_back(cell(x, y));
  return out;
}

std::string GridPegSpec::task_id(int shift_radius) const {
  std::ostringstream os;
  os << "gridpeg/s" << shape.id << "/o" << offset_dx << "," << offset_dy;
  if (shift_radius > 0) os << "/r" << shift_radius;
  return os.str();
}

GridPegSpec GridPegSpec::from_task_id(const std::string& task_id, const std::string& shapes_dir,
                                      int* radius_out) {
  const auto fail = [&]() -> GridPegSpec {
    throw std::invalid_argument("unrecognized task id: " + task_id);
  };
  const std::string prefix = "gridpeg/s";
  if (task_id.rfind(prefix, 0) != 0) return fail();
  const std::size_t off_at = task_id.find("/o", prefix.size());
  if (off_at == std::string::npos) return fail();
  const std::string shape_id = task_id.substr(prefix.size(), off_at - prefix.size());
  if (shape_id.empty()) return fail();

  std::string rest = task_id.substr(off_at + 2);
  int radius = 0;
  const std::size_t rad_at = rest.find("/r");
  if (rad_at != std::string::npos) {
    try {
      std::size_t used = 0;
      radius = std::stoi(rest.substr(rad_at + 2), &used);
      if (used != rest.size() - rad_at - 2) return fail();
    } catch (const std::exception&) {
      return fail();
    }
    rest = rest.substr(0, rad_at);
  }
  int dx = 0, dy = 0;
  const std::size_t comma = rest.find(',');
  if (comma == std::string::npos) return fail();
  try {
    std::size_t used = 0;
    dx = std::stoi(rest.substr(0, comma), &used);
    if (used != comma) return fail();
    dy = std::stoi(rest.substr(comma + 1), &used);
    if (used != rest.size() - comma - 1) return fail();
  } catch (const std::exception&) {
    return fail();
  }

  GridPegSpec spec;
  spec.shape = load_shape(shapes_dir, shape_id);
  spec.offset_dx = dx;
  spec.offset_dy = dy;
  if (radius_out != nullptr) *radius_out = radius;
  return spec;
}

void GridPegSpec::validate(int shift_radius) const {
  shape.validate();
  if (width < kShapeSize || height < kShapeSize)
    throw std::invalid_argument("GridPegSpec: grid smaller than the stencil");
  if (!(slip_prob >= 0.0 && slip_prob < 1.0))
    throw std::invalid_argument("GridPegSpec: slip_prob must lie in [0, 1)");
  if (horizon < 1) throw std::invalid_argument("GridPegSpec: horizon must be >= 1");
  if (success_reward <= 0.0)
    throw std::invalid_argument("GridPegSpec: success_reward must be positive");
  if (shift_radius < 0) throw std::invalid_argument("GridPegSpec: negative shift radius");
  if (!in_bounds(start_x, start_y))
    throw std::invalid_argument("GridPegSpec: start cell out of bounds");

  for (int ddy = -shift_radius; ddy <= shift_radius; ++ddy) {
    for (int ddx = -shift_radius; ddx <= shift_radius; ++ddx) {
      const int dx = offset_dx + ddx, dy = offset_dy + ddy;
      const int ax = anchor_x + dx, ay = anchor_y + dy;
      if (ax < 0 || ay < 0 || ax + kShapeSize > width || ay + kShapeSize > height)
        throw std::invalid_argument("GridPegSpec: stencil leaves the grid at offset (" +
                                    std::to_string(dx) + "," + std::to_string(dy) + ")");
      if (is_wall(start_x, start_y, dx, dy))
        throw std::invalid_argument("GridPegSpec: start cell is a wall at offset (" +
                                    std::to_string(dx) + "," + std::to_string(dy) + ")");
      if (cell(start_x, start_y) == cell(goal_x(dx), goal_y(dy)))
        throw std::invalid_argument("GridPegSpec: start coincides with the goal");
      if (!goal_reaches_all_free(*this, dx, dy))
        throw std::invalid_argument("GridPegSpec: goal unreachable from some free cell at offset (" +
                                    std::to_string(dx) + "," + std::to_string(dy) + ")");
    }
  }
}

GridPegEnv::GridPegEnv(GridPegSpec spec, int shift_radius)
    : spec_(std::move(spec)), shift_radius_(shift_radius) {
  spec_.validate(shift_radius_);
  active_dx_ = spec_.offset_dx;
  active_dy_ = spec_.offset_dy;
}

ResetResult GridPegEnv::reset(std::mt19937_64& rng) {
  active_dx_ = spec_.offset_dx;
  active_dy_ = spec_.offset_dy;
  if (shift_radius_ > 0) {
    // Uniform draw from the radius box; consumes rng even when radius is 0x0
    // never (radius > 0 guaranteed here).
    active_dx_ += rand_int(rng, 2 * shift_radius_ + 1) - shift_radius_;
    active_dy_ += rand_int(rng, 2 * shift_radius_ + 1) - shift_radius_;
  }
  state_ = spec_.start_cell();
  in_episode_ = true;
  return {state_, false};
}

StepResult GridPegEnv::step(int action, std::mt19937_64& rng) {
  if (!in_episode_) throw std::logic_error("GridPegEnv: step before reset");
  if (action < 0 || action >= kGridActions)
    throw std::invalid_argument("GridPegEnv: action out of range");

  int dir = action;
  if (action != kInsert && spec_.slip_prob > 0.0) {
    const double u = rand_double(rng);
    if (u < spec_.slip_prob / 2.0)
      dir = kLat1[action];
    else if (u < spec_.slip_prob)
      dir = kLat2[action];
  }
  const int x = spec_.cell_x(state_), y = spec_.cell_y(state_);
  const int target = move_target(spec_, x, y, dir, active_dx_, active_dy_);

  const int goal = spec_.cell(spec_.goal_x(active_dx_), spec_.goal_y(active_dy_));
  StepResult res;
  res.next_state = target;
  res.done = (target == goal) && (state_ != goal);
  res.reward = res.done ? spec_.success_reward : 0.0;
  state_ = target;
  if (res.done) in_episode_ = false;
  return res;
}

std::vector<double> GridPegEnv::features(int state) const {
  const double fx = spec_.width == 1 ? 0.0 : 2.0 * spec_.cell_x(state) / (spec_.width - 1) - 1.0;
  const double fy = spec_.height == 1 ? 0.0 : 2.0 * spec_.cell_y(state) / (spec_.height - 1) - 1.0;
  return {fx, fy};
}

std::unique_ptr<GridPegEnv> make_task(const GridPegSpec& spec) {
  return std::make_unique<GridPegEnv>(spec, 0);
}

std::unique_ptr<GridPegEnv> make_shift_randomized_task(const GridPegSpec& spec, int shift_radius) {
  return std::make_unique<GridPegEnv>(spec, shift_radius);
}

TabularMDP to_tabular(const GridPegSpec& spec, double gamma) {
  spec.validate();
  if (!(gamma >= 0.0 && gamma < 1.0))
    throw std::invalid_argument("to_tabular: gamma must lie in [0, 1)");
  const int S = spec.n_states();
  TabularMDP mdp;
  mdp.n_states = S;
  mdp.n_actions = kGridActions;
  mdp.discount = gamma;
  mdp.transition.assign(static_cast<std::size_t>(S) * kGridActions * S, 0.0);
  mdp.reward.assign(static_cast<std::size_t>(S) * kGridActions * S, 0.0);
  mdp.initial_dist.assign(S, 0.0);
  mdp.initial_dist[spec.start_cell()] = 1.0;
  const int goal = spec.goal_cell();
  mdp.terminals = {goal};

  for (int y = 0; y < spec.height; ++y) {
    for (int x = 0; x < spec.width; ++x) {
      const int s = spec.cell(x, y);
      const bool inert = spec.is_wall(x, y) || s == goal;  // absorbing rows
      for (int a = 0; a < kGridActions; ++a) {
        if (inert) {
          mdp.transition[mdp.idx(s, a, s)] = 1.0;
          continue;
        }
        // Outcome distribution over executed directions.
        if (a == kInsert) {
          mdp.transition[mdp.idx(s, a, s)] += 1.0;
        } else {
          const double slip = spec.slip_prob;
          mdp.transition[mdp.idx(s, a, move_target(spec, x, y, a, spec.offset_dx, spec.offset_dy))] +=
              1.0 - slip;
          if (slip > 0.0) {
            mdp.transition[mdp.idx(s, a, move_target(spec, x, y, kLat1[a], spec.offset_dx, spec.offset_dy))] +=
                slip / 2.0;
            mdp.transition[mdp.idx(s, a, move_target(spec, x, y, kLat2[a], spec.offset_dx, spec.offset_dy))] +=
                slip / 2.0;
          }
        }
        mdp.reward[mdp.idx(s, a, goal)] = spec.success_reward;
      }
    }
  }
  return mdp;
}

TabularMDP to_tabular_shared_reward(const GridPegSpec& dynamics_spec,
                                    const GridPegSpec& reward_spec, double gamma) {
  if (dynamics_spec.width != reward_spec.width || dynamics_spec.height != reward_spec.height)
    throw std::invalid_argument("to_tabular_shared_reward: grid sizes differ");
  TabularMDP mdp = to_tabular(dynamics_spec, gamma);
  mdp.reward = to_tabular(reward_spec, gamma).reward;
  return mdp;
}

TaskGrid task_grid(const GridPegSpec& base, const std::vector<ShapeMask>& shapes,
                   const std::vector<int>& shift_radii) {
  TaskGrid grid;
  for (std::size_t yi = 0; yi < shapes.size(); ++yi) {
    for (std::size_t xi = 0; xi < shift_radii.size(); ++xi) {
      TaskVariant variant;
      variant.spec = base;
      variant.spec.shape = shapes[yi];
      variant.spec.offset_dx = 0;
      variant.spec.offset_dy = 0;
      variant.shift_radius = shift_radii[xi];
      variant.mismatch_x = static_cast<int>(xi);
      variant.mismatch_y = static_cast<int>(yi);
      variant.label = variant.spec.task_id(variant.shift_radius);
      try {
        variant.spec.validate(variant.shift_radius);
      } catch (const std::exception& e) {
        grid.warnings.push_back("skipped " + variant.label + ": " + e.what());
        continue;
      }
      grid.tasks.push_back(std::move(variant));
    }
  }
  return grid;
}

}  // namespace crsfd
