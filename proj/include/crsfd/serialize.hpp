#pragma once

#include <random>
#include <string>
#include <vector>

#include "crsfd/demos.hpp"
#include "crsfd/gridpeg.hpp"
#include "crsfd/mdp.hpp"
#include "crsfd/mlp.hpp"
#include "crsfd/potential.hpp"
#include "vendor/json.hpp"

namespace crsfd {

using json = nlohmann::json;

// --- file helpers ---------------------------------------------------------

std::string read_text_file(const std::string& path);

// Writes to <path>.tmp then renames, so readers never see a torn file.
void write_text_file(const std::string& path, const std::string& content);

void write_json_file(const std::string& path, const json& j);
json read_json_file(const std::string& path);

// Shortest round-trip text for a double (printf %.17g).
std::string format_double(double v);

// CSV with a header row; numeric cells rendered via format_double.
void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows);

// --- digests and RNG state ------------------------------------------------

std::string sha1_hex(const std::string& bytes);

// mt19937_64 state as the standard textual serialization (decimal words).
std::string rng_state_string(const std::mt19937_64& rng);
void rng_state_restore(std::mt19937_64& rng, const std::string& state);

// --- versioned JSON schemas -----------------------------------------------
// Every persisted document carries {"schema": <name>, "version": <int>} and
// loading rejects anything it does not understand.

json make_versioned(const std::string& schema, int version = 1);
void check_schema(const json& j, const std::string& schema, int version = 1);

json mdp_to_json(const TabularMDP& mdp);
TabularMDP mdp_from_json(const json& j);

json transition_to_json(const Transition& t);
Transition transition_from_json(const json& j);

json trajectory_to_json(const Trajectory& traj);
Trajectory trajectory_from_json(const json& j);

json demos_to_json(const DemoSet& demos);
DemoSet demos_from_json(const json& j);

json shape_to_json(const ShapeMask& shape);
ShapeMask shape_from_json(const json& j);

json gridpeg_to_json(const GridPegSpec& spec);
GridPegSpec gridpeg_from_json(const json& j);

json mlp_to_json(const MlpNet& net);
MlpNet mlp_from_json(const json& j);

json featurizer_to_json(const Featurizer& f);
Featurizer featurizer_from_json(const json& j);

json potential_to_json(const PotentialFn& phi);
PotentialFn potential_from_json(const json& j);

}  // namespace crsfd
