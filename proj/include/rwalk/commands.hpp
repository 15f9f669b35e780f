#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "rwalk/formulations.hpp"

namespace rwalk::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kInfeasible = 2, kSolverFailure = 3 };

struct TimelinePoint {
    double elapsed_s;
    double value;
};

/// Outcome of one optimization run, written as JSON.
struct RunRecord {
    std::string method;  // rw, exact-enum, exact-bnb
    std::string network;
    std::optional<std::uint64_t> net_seed;
    nlohmann::json config = nlohmann::json::object();
    std::vector<TimelinePoint> timeline;
    double final_value = 0.0;
    std::vector<double> x;
    std::string termination;
    std::size_t local_search_count = 0;
    std::optional<double> bound;
    double wall_s = 0.0;
    std::optional<bool> adversarial_found;
};

nlohmann::json to_json(const RunRecord& r);
RunRecord record_from_json(const nlohmann::json& j);

/// `elapsed_s,value` rows with a header line.
void write_timeline_csv(const RunRecord& r, std::ostream& out);
std::vector<TimelinePoint> read_timeline_csv(std::istream& in);

/// "output:k" selects e_k; otherwise a comma-separated list of m numbers.
Objective parse_objective(const std::string& text, std::size_t output_dim);

/// "box:lo,hi" applies one interval to every coordinate; "l1:<anchor file>,<radius>"
/// intersects the L1 ball with `box` (or, when absent, the network's input
/// box, or else the ball's enclosing box).
InputDomain parse_domain(const std::string& text, const Network& net,
                         const std::optional<std::pair<double, double>>& box = std::nullopt);

std::vector<double> load_anchor_file(const std::string& path);

/// Deterministic 64-bit mixing of a seed with stream coordinates.
std::uint64_t split_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> coords);

struct ExperimentRow {
    std::size_t n0, depth, width;
    std::uint64_t net_seed;
    std::string method;
    double final_value;
    std::size_t local_search_count;
    double wall_s;
    std::string termination;
};

void write_experiment_csv(const std::vector<ExperimentRow>& rows, std::ostream& out);
std::vector<ExperimentRow> read_experiment_csv(std::istream& in);

int cmd_optimize(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int cmd_random_experiment(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int cmd_adversary(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Dispatches on args[0] (the subcommand).
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace rwalk::cli
