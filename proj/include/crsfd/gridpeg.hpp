#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "crsfd/env.hpp"
#include "crsfd/mdp.hpp"

namespace crsfd {

inline constexpr int kShapeSize = 5;

// Grid actions. insert is a deterministic stay-in-place; success comes from
// moving onto the goal cell, so insert only enriches the action set.
enum GridAction : int {
  kUp = 0,
  kDown = 1,
  kLeft = 2,
  kRight = 3,
  kInsert = 4,
};
inline constexpr int kGridActions = 5;

// 5x5 stencil of '#' (wall) and '.' (free). The goal sits at the stencil
// center (2,2), which every shipped stencil keeps free.
struct ShapeMask {
  std::string id;
  std::array<std::string, kShapeSize> rows;

  bool wall(int mx, int my) const { return rows[my][mx] == '#'; }
  void validate() const;  // throws std::invalid_argument
};

// Parse a stencil from 5 lines of '#'/'.'; id is taken from the caller.
ShapeMask parse_shape(const std::string& id, const std::vector<std::string>& lines);
// Load "<dir>/<id>.txt".
ShapeMask load_shape(const std::string& shapes_dir, const std::string& id);

// A peg-in-hole gridworld: open approach area above a 5x5 shape stencil;
// the hole is the stencil center. hole_offset displaces the whole stencil
// (goal and walls move together).
struct GridPegSpec {
  int width = 15;
  int height = 19;
  ShapeMask shape;
  int anchor_x = 5;   // nominal stencil top-left
  int anchor_y = 10;
  int offset_dx = 0;  // hole displacement relative to the anchor
  int offset_dy = 0;
  double slip_prob = 0.0;  // lateral slip: intended 1-slip, each side slip/2
  int horizon = 50;
  double success_reward = 1.0;
  int start_x = 7;
  int start_y = 5;

  int n_states() const { return width * height; }
  int cell(int x, int y) const { return y * width + x; }
  int cell_x(int s) const { return s % width; }
  int cell_y(int s) const { return s / width; }
  bool in_bounds(int x, int y) const { return x >= 0 && x < width && y >= 0 && y < height; }

  // Wall test under a concrete displacement (dx, dy) of the stencil.
  bool is_wall(int x, int y, int dx, int dy) const;
  bool is_wall(int x, int y) const { return is_wall(x, y, offset_dx, offset_dy); }

  int goal_x(int dx) const { return anchor_x + dx + kShapeSize / 2; }
  int goal_y(int dy) const { return anchor_y + dy + kShapeSize / 2; }
  int goal_cell() const { return cell(goal_x(offset_dx), goal_y(offset_dy)); }
  int start_cell() const { return cell(start_x, start_y); }

  // Free cells under the spec's own offset (excludes walls, includes goal).
  std::vector<int> free_cells() const;

  std::string task_id(int shift_radius = 0) const;

  // Inverse of task_id for default-geometry tasks: parses
  // "gridpeg/s<shape>/o<dx>,<dy>[/r<radius>]", loading the shape stencil from
  // shapes_dir. The optional radius suffix lands in *radius_out if given.
  static GridPegSpec from_task_id(const std::string& task_id, const std::string& shapes_dir,
                                  int* radius_out = nullptr);

  // Validates geometry for this offset and, if shift_radius > 0, for every
  // offset in the surrounding box: stencil in bounds, start free and distinct
  // from the goal, goal reachable from every free cell.
  void validate(int shift_radius = 0) const;
};

// Movement-only environment over a GridPegSpec. With shift_radius > 0 the
// hole offset is redrawn uniformly from the radius box at every reset and is
// not observable: the state is the agent's cell only.
class GridPegEnv : public Env {
 public:
  explicit GridPegEnv(GridPegSpec spec, int shift_radius = 0);

  ResetResult reset(std::mt19937_64& rng) override;
  StepResult step(int action, std::mt19937_64& rng) override;
  int n_states() const override { return spec_.n_states(); }
  int n_actions() const override { return kGridActions; }
  std::vector<double> features(int state) const override;
  int default_horizon() const override { return spec_.horizon; }
  std::string id() const override { return spec_.task_id(shift_radius_); }

  const GridPegSpec& spec() const { return spec_; }
  int shift_radius() const { return shift_radius_; }
  // Offset drawn at the last reset (test hook; agents must not read this).
  int active_dx() const { return active_dx_; }
  int active_dy() const { return active_dy_; }

 private:
  GridPegSpec spec_;
  int shift_radius_ = 0;
  int state_ = 0;
  int active_dx_ = 0;
  int active_dy_ = 0;
  bool in_episode_ = false;
};

// Validating constructors. make_task keeps the spec's fixed offset;
// make_shift_randomized_task redraws within the radius box per episode.
std::unique_ptr<GridPegEnv> make_task(const GridPegSpec& spec);
std::unique_ptr<GridPegEnv> make_shift_randomized_task(const GridPegSpec& spec, int shift_radius);

// Exact tabularization of the spec at its fixed offset. The goal cell is the
// single terminal; wall cells are absorbing self-loops (unreachable);
// initial_dist is one-hot at the start cell. Reward is success_reward exactly
// on entering the goal.
TabularMDP to_tabular(const GridPegSpec& spec, double gamma);

// Tabularization of a task pair that differs in dynamics only: movement and
// terminals follow dynamics_spec, the reward tensor is copied from
// reward_spec's task. This is the setting the shaped-reward transfer bound is
// stated for (one shared reward function, two transition kernels); a shifted
// task's own reward would move the success payoff off the demo support and
// the bound would not apply. Both specs must share the grid size.
TabularMDP to_tabular_shared_reward(const GridPegSpec& dynamics_spec,
                                    const GridPegSpec& reward_spec, double gamma);

// One entry of the mismatch panel: a base spec (offset forced to 0,0) plus a
// shift radius, tagged with its (reward, dynamics) mismatch coordinates.
struct TaskVariant {
  GridPegSpec spec;
  int shift_radius = 0;
  int mismatch_x = 0;  // index into the radius list (reward change axis)
  int mismatch_y = 0;  // index into the shape list (dynamics change axis)
  std::string label;
};

struct TaskGrid {
  std::vector<TaskVariant> tasks;
  std::vector<std::string> warnings;  // skipped invalid combinations
};

// Cartesian product of shapes x shift radii over the base geometry.
// Invalid combinations are skipped and recorded, not fatal.
TaskGrid task_grid(const GridPegSpec& base, const std::vector<ShapeMask>& shapes,
                   const std::vector<int>& shift_radii);

}  // namespace crsfd
