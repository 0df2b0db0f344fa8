#include "crsfd/serialize.hpp"

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace crsfd {

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open file for reading: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  const std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open file for writing: " + tmp);
    out << content;
    if (!out) throw std::runtime_error("write failed: " + tmp);
  }
  std::filesystem::rename(tmp, p);
}

void write_json_file(const std::string& path, const json& j) {
  write_text_file(path, j.dump(2) + "\n");
}

json read_json_file(const std::string& path) {
  return json::parse(read_text_file(path));
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows) {
  std::ostringstream out;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (i) out << ',';
    out << header[i];
  }
  out << '\n';
  for (const auto& row : rows) {
    if (row.size() != header.size())
      throw std::invalid_argument("csv row width does not match header");
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out << ',';
      out << format_double(row[i]);
    }
    out << '\n';
  }
  write_text_file(path, out.str());
}

// --- SHA-1 ------------------------------------------------------------------

namespace {

inline std::uint32_t rol32(std::uint32_t v, int n) { return (v << n) | (v >> (32 - n)); }

}  // namespace

std::string sha1_hex(const std::string& bytes) {
  std::uint32_t h[5] = {0x67452301u, 0xEFCDAB89u, 0x98BADCFEu, 0x10325476u, 0xC3D2E1F0u};

  std::string msg = bytes;
  const std::uint64_t bit_len = static_cast<std::uint64_t>(bytes.size()) * 8;
  msg.push_back(static_cast<char>(0x80));
  while (msg.size() % 64 != 56) msg.push_back('\0');
  for (int i = 7; i >= 0; --i) msg.push_back(static_cast<char>((bit_len >> (8 * i)) & 0xFF));

  for (std::size_t chunk = 0; chunk < msg.size(); chunk += 64) {
    std::uint32_t w[80];
    for (int i = 0; i < 16; ++i) {
      w[i] = (static_cast<std::uint32_t>(static_cast<unsigned char>(msg[chunk + 4 * i])) << 24) |
             (static_cast<std::uint32_t>(static_cast<unsigned char>(msg[chunk + 4 * i + 1])) << 16) |
             (static_cast<std::uint32_t>(static_cast<unsigned char>(msg[chunk + 4 * i + 2])) << 8) |
             static_cast<std::uint32_t>(static_cast<unsigned char>(msg[chunk + 4 * i + 3]));
    }
    for (int i = 16; i < 80; ++i) w[i] = rol32(w[i - 3] ^ w[i - 8] ^ w[i - 14] ^ w[i - 16], 1);

    std::uint32_t a = h[0], b = h[1], c = h[2], d = h[3], e = h[4];
    for (int i = 0; i < 80; ++i) {
      std::uint32_t f, k;
      if (i < 20) {
        f = (b & c) | ((~b) & d);
        k = 0x5A827999u;
      } else if (i < 40) {
        f = b ^ c ^ d;
        k = 0x6ED9EBA1u;
      } else if (i < 60) {
        f = (b & c) | (b & d) | (c & d);
        k = 0x8F1BBCDCu;
      } else {
        f = b ^ c ^ d;
        k = 0xCA62C1D6u;
      }
      const std::uint32_t tmp = rol32(a, 5) + f + e + k + w[i];
      e = d;
      d = c;
      c = rol32(b, 30);
      b = a;
      a = tmp;
    }
    h[0] += a;
    h[1] += b;
    h[2] += c;
    h[3] += d;
    h[4] += e;
  }

  std::ostringstream out;
  for (std::uint32_t v : h) {
    char buf[9];
    std::snprintf(buf, sizeof(buf), "%08x", v);
    out << buf;
  }
  return out.str();
}

// --- RNG state ----------------------------------------------------------------

std::string rng_state_string(const std::mt19937_64& rng) {
  std::ostringstream out;
  out << rng;
  return out.str();
}

void rng_state_restore(std::mt19937_64& rng, const std::string& state) {
  std::istringstream in(state);
  in >> rng;
  if (in.fail()) throw std::runtime_error("malformed rng state string");
}

// --- schemas ------------------------------------------------------------------

json make_versioned(const std::string& schema, int version) {
  json j;
  j["schema"] = schema;
  j["version"] = version;
  return j;
}

void check_schema(const json& j, const std::string& schema, int version) {
  if (!j.is_object() || !j.contains("schema") || !j.contains("version"))
    throw std::runtime_error("document is missing schema/version fields (expected " + schema + ")");
  const std::string got = j.at("schema").get<std::string>();
  const int got_v = j.at("version").get<int>();
  if (got != schema)
    throw std::runtime_error("schema mismatch: expected " + schema + ", found " + got);
  if (got_v != version)
    throw std::runtime_error("unsupported version of " + schema + ": " + std::to_string(got_v));
}

json mdp_to_json(const TabularMDP& mdp) {
  json j = make_versioned("crsfd/mdp");
  j["n_states"] = mdp.n_states;
  j["n_actions"] = mdp.n_actions;
  j["discount"] = mdp.discount;
  j["transitions"] = mdp.transition;
  j["rewards"] = mdp.reward;
  j["terminals"] = mdp.terminals;
  j["initial_dist"] = mdp.initial_dist;
  return j;
}

TabularMDP mdp_from_json(const json& j) {
  check_schema(j, "crsfd/mdp");
  TabularMDP mdp;
  mdp.n_states = j.at("n_states").get<int>();
  mdp.n_actions = j.at("n_actions").get<int>();
  mdp.discount = j.at("discount").get<double>();
  mdp.transition = j.at("transitions").get<std::vector<double>>();
  mdp.reward = j.at("rewards").get<std::vector<double>>();
  mdp.terminals = j.at("terminals").get<std::vector<int>>();
  mdp.initial_dist = j.at("initial_dist").get<std::vector<double>>();
  mdp.validate();
  return mdp;
}

json transition_to_json(const Transition& t) {
  return json::array({t.state, t.action, t.reward, t.next_state, t.done, t.truncated});
}

Transition transition_from_json(const json& j) {
  if (!j.is_array() || j.size() != 6) throw std::runtime_error("transition must be a 6-element array");
  Transition t;
  t.state = j.at(0).get<int>();
  t.action = j.at(1).get<int>();
  t.reward = j.at(2).get<double>();
  t.next_state = j.at(3).get<int>();
  t.done = j.at(4).get<bool>();
  t.truncated = j.at(5).get<bool>();
  return t;
}

json trajectory_to_json(const Trajectory& traj) {
  json j;
  j["task_id"] = traj.task_id;
  j["success"] = traj.success;
  json steps = json::array();
  for (const auto& t : traj.transitions) steps.push_back(transition_to_json(t));
  j["transitions"] = std::move(steps);
  return j;
}

Trajectory trajectory_from_json(const json& j) {
  Trajectory traj;
  traj.task_id = j.at("task_id").get<std::string>();
  traj.success = j.at("success").get<bool>();
  for (const auto& step : j.at("transitions")) traj.transitions.push_back(transition_from_json(step));
  return traj;
}

json demos_to_json(const DemoSet& demos) {
  json j = make_versioned("crsfd/demos");
  j["source_task"] = demos.source_task;
  j["gamma0"] = demos.gamma0;
  j["collection_note"] = demos.collection_note;
  json trajs = json::array();
  for (const auto& t : demos.trajectories) trajs.push_back(trajectory_to_json(t));
  j["trajectories"] = std::move(trajs);
  return j;
}

DemoSet demos_from_json(const json& j) {
  check_schema(j, "crsfd/demos");
  DemoSet demos;
  demos.source_task = j.at("source_task").get<std::string>();
  demos.gamma0 = j.at("gamma0").get<double>();
  demos.collection_note = j.at("collection_note").get<std::string>();
  for (const auto& t : j.at("trajectories")) demos.trajectories.push_back(trajectory_from_json(t));
  return demos;
}

json shape_to_json(const ShapeMask& shape) {
  json j = make_versioned("crsfd/shape");
  j["id"] = shape.id;
  j["rows"] = shape.rows;
  return j;
}

ShapeMask shape_from_json(const json& j) {
  check_schema(j, "crsfd/shape");
  ShapeMask shape;
  shape.id = j.at("id").get<std::string>();
  const auto rows = j.at("rows").get<std::vector<std::string>>();
  if (rows.size() != kShapeSize) throw std::runtime_error("shape must have exactly 5 rows");
  for (std::size_t i = 0; i < kShapeSize; ++i) shape.rows[i] = rows[i];
  shape.validate();
  return shape;
}

json gridpeg_to_json(const GridPegSpec& spec) {
  json j = make_versioned("crsfd/gridpeg");
  j["width"] = spec.width;
  j["height"] = spec.height;
  j["anchor_x"] = spec.anchor_x;
  j["anchor_y"] = spec.anchor_y;
  j["offset_dx"] = spec.offset_dx;
  j["offset_dy"] = spec.offset_dy;
  j["slip_prob"] = spec.slip_prob;
  j["horizon"] = spec.horizon;
  j["success_reward"] = spec.success_reward;
  j["start_x"] = spec.start_x;
  j["start_y"] = spec.start_y;
  j["shape"] = shape_to_json(spec.shape);
  return j;
}

GridPegSpec gridpeg_from_json(const json& j) {
  check_schema(j, "crsfd/gridpeg");
  GridPegSpec spec;
  spec.width = j.at("width").get<int>();
  spec.height = j.at("height").get<int>();
  spec.anchor_x = j.at("anchor_x").get<int>();
  spec.anchor_y = j.at("anchor_y").get<int>();
  spec.offset_dx = j.at("offset_dx").get<int>();
  spec.offset_dy = j.at("offset_dy").get<int>();
  spec.slip_prob = j.at("slip_prob").get<double>();
  spec.horizon = j.at("horizon").get<int>();
  spec.success_reward = j.at("success_reward").get<double>();
  spec.start_x = j.at("start_x").get<int>();
  spec.start_y = j.at("start_y").get<int>();
  spec.shape = shape_from_json(j.at("shape"));
  spec.validate(0);
  return spec;
}

json mlp_to_json(const MlpNet& net) {
  json j = make_versioned("crsfd/mlp");
  j["input_dim"] = net.input_dim;
  j["output_dim"] = net.output_dim;
  j["hidden"] = net.hidden;
  j["weights"] = net.w;
  j["biases"] = net.b;
  return j;
}

MlpNet mlp_from_json(const json& j) {
  check_schema(j, "crsfd/mlp");
  MlpNet net;
  net.input_dim = j.at("input_dim").get<int>();
  net.output_dim = j.at("output_dim").get<int>();
  net.hidden = j.at("hidden").get<std::vector<int>>();
  net.w = j.at("weights").get<std::vector<std::vector<double>>>();
  net.b = j.at("biases").get<std::vector<std::vector<double>>>();
  const std::size_t n_layers = net.hidden.size() + 1;
  if (net.w.size() != n_layers || net.b.size() != n_layers)
    throw std::runtime_error("mlp layer count does not match hidden sizes");
  for (std::size_t l = 0; l < n_layers; ++l) {
    const std::size_t in = static_cast<std::size_t>(net.layer_in(l));
    const std::size_t out = static_cast<std::size_t>(net.layer_out(l));
    if (net.w[l].size() != in * out || net.b[l].size() != out)
      throw std::runtime_error("mlp layer " + std::to_string(l) + " has wrong parameter shape");
  }
  return net;
}

json featurizer_to_json(const Featurizer& f) {
  json j = make_versioned("crsfd/featurizer");
  j["width"] = f.width;
  j["height"] = f.height;
  return j;
}

Featurizer featurizer_from_json(const json& j) {
  check_schema(j, "crsfd/featurizer");
  Featurizer f;
  f.width = j.at("width").get<int>();
  f.height = j.at("height").get<int>();
  if (f.width <= 0 || f.height <= 0) throw std::runtime_error("featurizer dimensions must be positive");
  return f;
}

json potential_to_json(const PotentialFn& phi) {
  json j = make_versioned("crsfd/potential");
  if (phi.backend() == PotentialFn::Backend::kTabular) {
    j["backend"] = "tabular";
    j["values"] = phi.table();
  } else {
    j["backend"] = "mlp";
    j["net"] = mlp_to_json(phi.net());
    j["featurizer"] = featurizer_to_json(phi.featurizer());
  }
  return j;
}

PotentialFn potential_from_json(const json& j) {
  check_schema(j, "crsfd/potential");
  const std::string backend = j.at("backend").get<std::string>();
  if (backend == "tabular") {
    return PotentialFn::tabular(j.at("values").get<std::vector<double>>());
  }
  if (backend == "mlp") {
    return PotentialFn::mlp(mlp_from_json(j.at("net")), featurizer_from_json(j.at("featurizer")));
  }
  throw std::runtime_error("unknown potential backend: " + backend);
}

}  // namespace crsfd
