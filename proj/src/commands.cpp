#include "rwalk/commands.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <omp.h>

#include "CLI11.hpp"
#include "rwalk/exact.hpp"
#include "rwalk/generator.hpp"

namespace rwalk::cli {

using nlohmann::json;

namespace {

std::string fmt(double v) {
    std::ostringstream ss;
    ss << std::setprecision(17) << v;
    return ss.str();
}

double parse_double(const std::string& s) {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument("not a number: " + s);
    return v;
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> parts;
    std::string cur;
    std::istringstream in(s);
    while (std::getline(in, cur, sep)) parts.push_back(cur);
    if (!s.empty() && s.back() == sep) parts.emplace_back();
    return parts;
}

std::pair<double, double> parse_interval(const std::string& s) {
    const auto parts = split(s, ',');
    if (parts.size() != 2) throw CLI::ValidationError("interval", "expected lo,hi but got '" + s + "'");
    return {parse_double(parts[0]), parse_double(parts[1])};
}

}  // namespace

// --- records -----------------------------------------------------------------

json to_json(const RunRecord& r) {
    json j;
    j["method"] = r.method;
    j["network"] = r.network;
    if (r.net_seed) j["net_seed"] = *r.net_seed;
    j["config"] = r.config;
    json tl = json::array();
    for (const auto& p : r.timeline)
        if (std::isfinite(p.value)) tl.push_back({{"elapsed_s", p.elapsed_s}, {"value", p.value}});
    j["timeline"] = tl;
    j["final_value"] = std::isfinite(r.final_value) ? json(r.final_value) : json(nullptr);
    j["x"] = r.x;
    j["termination"] = r.termination;
    j["local_search_count"] = r.local_search_count;
    if (r.bound) j["bound"] = std::isfinite(*r.bound) ? json(*r.bound) : json(nullptr);
    j["wall_s"] = r.wall_s;
    if (r.adversarial_found) j["adversarial_found"] = *r.adversarial_found;
    return j;
}

RunRecord record_from_json(const json& j) {
    RunRecord r;
    r.method = j.at("method").get<std::string>();
    r.network = j.at("network").get<std::string>();
    if (j.contains("net_seed")) r.net_seed = j["net_seed"].get<std::uint64_t>();
    r.config = j.at("config");
    for (const auto& p : j.at("timeline"))
        r.timeline.push_back({p.at("elapsed_s").get<double>(), p.at("value").get<double>()});
    r.final_value = j.at("final_value").is_null() ? -kInf : j["final_value"].get<double>();
    r.x = j.at("x").get<std::vector<double>>();
    r.termination = j.at("termination").get<std::string>();
    r.local_search_count = j.at("local_search_count").get<std::size_t>();
    if (j.contains("bound")) r.bound = j["bound"].is_null() ? kInf : j["bound"].get<double>();
    r.wall_s = j.at("wall_s").get<double>();
    if (j.contains("adversarial_found")) r.adversarial_found = j["adversarial_found"].get<bool>();
    return r;
}

void write_timeline_csv(const RunRecord& r, std::ostream& out) {
    out << "elapsed_s,value\n";
    for (const auto& p : r.timeline)
        if (std::isfinite(p.value)) out << fmt(p.elapsed_s) << ',' << fmt(p.value) << '\n';
}

std::vector<TimelinePoint> read_timeline_csv(std::istream& in) {
    std::vector<TimelinePoint> points;
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto parts = split(line, ',');
        if (parts.size() != 2) throw std::runtime_error("timeline: malformed row '" + line + "'");
        points.push_back({parse_double(parts[0]), parse_double(parts[1])});
    }
    return points;
}

void write_experiment_csv(const std::vector<ExperimentRow>& rows, std::ostream& out) {
    out << "n0,depth,width,net_seed,method,final_value,local_search_count,wall_s,termination\n";
    for (const auto& r : rows)
        out << r.n0 << ',' << r.depth << ',' << r.width << ',' << r.net_seed << ',' << r.method << ','
            << fmt(r.final_value) << ',' << r.local_search_count << ',' << fmt(r.wall_s) << ',' << r.termination
            << '\n';
}

std::vector<ExperimentRow> read_experiment_csv(std::istream& in) {
    std::vector<ExperimentRow> rows;
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto p = split(line, ',');
        if (p.size() != 9) throw std::runtime_error("experiment csv: malformed row '" + line + "'");
        rows.push_back({std::stoul(p[0]), std::stoul(p[1]), std::stoul(p[2]), std::stoull(p[3]), p[4],
                        parse_double(p[5]), std::stoul(p[6]), parse_double(p[7]), p[8]});
    }
    return rows;
}

// --- parsing helpers ---------------------------------------------------------

Objective parse_objective(const std::string& text, std::size_t output_dim) {
    if (text.rfind("output:", 0) == 0) {
        const auto k = std::stoul(text.substr(7));
        if (k >= output_dim)
            throw CLI::ValidationError("--objective", "output index " + std::to_string(k) + " out of range");
        Objective obj{std::vector<double>(output_dim, 0.0)};
        obj.c[k] = 1.0;
        return obj;
    }
    Objective obj;
    for (const auto& p : split(text, ',')) obj.c.push_back(parse_double(p));
    if (obj.c.size() != output_dim)
        throw CLI::ValidationError("--objective", "expected " + std::to_string(output_dim) + " coefficients");
    return obj;
}

std::vector<double> load_anchor_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw CLI::ValidationError("anchor", "cannot open " + path);
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw CLI::ValidationError("anchor", std::string("malformed anchor file: ") + e.what());
    }
    if (!j.is_array()) throw CLI::ValidationError("anchor", "anchor file must hold a JSON array");
    return j.get<std::vector<double>>();
}

InputDomain parse_domain(const std::string& text, const Network& net,
                         const std::optional<std::pair<double, double>>& box) {
    const std::size_t n = net.input_dim();
    auto base_box = [&]() -> std::optional<Box> {
        if (box) return InputDomain::uniform_box(n, box->first, box->second).box;
        if (net.input_box()) return *net.input_box();
        return std::nullopt;
    };
    if (text.empty()) {
        auto b = base_box();
        if (!b) throw CLI::ValidationError("--domain", "required: the network records no input box");
        return InputDomain{*b, std::nullopt};
    }
    if (text.rfind("box:", 0) == 0) {
        const auto [lo, hi] = parse_interval(text.substr(4));
        return InputDomain::uniform_box(n, lo, hi);
    }
    if (text.rfind("l1:", 0) == 0) {
        const std::string rest = text.substr(3);
        const auto comma = rest.rfind(',');
        if (comma == std::string::npos) throw CLI::ValidationError("--domain", "expected l1:<anchor file>,<radius>");
        L1Ball ball{load_anchor_file(rest.substr(0, comma)), parse_double(rest.substr(comma + 1))};
        if (ball.anchor.size() != n)
            throw CLI::ValidationError("--domain", "anchor has " + std::to_string(ball.anchor.size()) +
                                                       " entries, network expects " + std::to_string(n));
        Box b;
        if (auto bb = base_box()) {
            b = *bb;
        } else {
            b = Box{ball.anchor, ball.anchor};
            for (std::size_t i = 0; i < n; ++i) {
                b.lo[i] -= ball.radius;
                b.hi[i] += ball.radius;
            }
        }
        return InputDomain{std::move(b), std::move(ball)};
    }
    throw CLI::ValidationError("--domain", "unknown domain '" + text + "'");
}

std::uint64_t split_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> coords) {
    auto mix = [](std::uint64_t z) {
        z += 0x9e3779b97f4a7c15ULL;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    };
    std::uint64_t h = mix(seed);
    for (std::uint64_t c : coords) h = mix(h ^ mix(c));
    return h;
}

// --- method runner -------------------------------------------------------------

namespace {

struct MethodOptions {
    std::string method = "rw";
    std::optional<double> time_limit_s;
    std::optional<std::size_t> iters;
    std::uint64_t seed = 0;
    double eps = 0.01;
    double flip_delta = 0.1;
    std::size_t runs = 1;
    std::size_t max_patterns = std::size_t{1} << 20;
    std::size_t max_nodes = 1'000'000;
};

void add_method_options(CLI::App& app, MethodOptions& o) {
    app.add_option("--method", o.method, "rw | enum | bnb")->check(CLI::IsMember({"rw", "enum", "bnb"}));
    app.add_option("--time-limit", o.time_limit_s, "wall-clock budget in seconds");
    app.add_option("--iters", o.iters, "outer-loop budget for rw (reproducible mode)");
    app.add_option("--seed", o.seed, "random seed");
    app.add_option("--eps", o.eps, "walk step fraction")->check(CLI::PositiveNumber);
    app.add_option("--flip-delta", o.flip_delta, "flip probability shift")->check(CLI::PositiveNumber);
    app.add_option("--runs", o.runs, "independent rw runs in parallel (seeds seed, seed+1, ...)")
        ->check(CLI::PositiveNumber);
    app.add_option("--max-patterns", o.max_patterns, "enumeration cap");
    app.add_option("--max-nodes", o.max_nodes, "branch-and-bound node cap");
}

json domain_json(const InputDomain& d) {
    json j{{"lo", d.box.lo}, {"hi", d.box.hi}};
    if (d.l1) j["l1"] = {{"anchor", d.l1->anchor}, {"radius", d.l1->radius}};
    return j;
}

std::string method_name(const std::string& m) {
    if (m == "enum") return "exact-enum";
    if (m == "bnb") return "exact-bnb";
    return m;
}

class SolverFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

RunRecord run_method(const Network& net, const InputDomain& domain, const Objective& obj, const MethodOptions& o) {
    domain.validate();
    RunRecord rec;
    rec.method = method_name(o.method);
    rec.config = {{"method", o.method}, {"objective", obj.c},   {"domain", domain_json(domain)},
                  {"seed", o.seed},     {"eps", o.eps},         {"flip_delta", o.flip_delta},
                  {"runs", o.runs},     {"max_patterns", o.max_patterns}, {"max_nodes", o.max_nodes}};
    rec.config["time_limit_s"] = o.time_limit_s ? json(*o.time_limit_s) : json(nullptr);
    rec.config["iters"] = o.iters ? json(*o.iters) : json(nullptr);

    const auto start = std::chrono::steady_clock::now();
    auto elapsed = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(); };

    if (o.method == "rw") {
        GenConfig gen;
        gen.delta = o.flip_delta;
        gen.seed = o.seed;
        gen.outer_iterations = o.iters;
        gen.time_limit_s = o.time_limit_s;
        if (!o.iters && !o.time_limit_s) gen.time_limit_s = 10.0;
        if (o.iters) gen.time_limit_s.reset();
        WalkConfig walk;
        walk.eps = o.eps;
        auto on_inc = [&](const Incumbent& inc) { rec.timeline.push_back({elapsed(), inc.value}); };
        const GeneratorResult res = o.runs > 1 ? run_portfolio(net, domain, obj, gen, o.runs, walk, on_inc)
                                               : run_generator(net, domain, obj, gen, walk, on_inc);
        if (!res.incumbent.valid()) throw SolverFailure("rw produced no solution");
        rec.final_value = res.incumbent.value;
        rec.x = res.incumbent.x;
        rec.termination = to_string(res.termination);
        rec.local_search_count = res.local_searches;
    } else {
        ExactResult res;
        if (o.method == "enum") {
            res = enumerate_regions_optimize(net, domain, obj, o.max_patterns, o.time_limit_s);
        } else {
            BnbLimits limits;
            limits.max_nodes = o.max_nodes;
            limits.time_limit_s = o.time_limit_s;
            res = branch_and_bound(net, domain, obj, layer_bounds(net, domain.enclosing_box()), limits);
        }
        if (res.x.empty() && res.complete()) throw SolverFailure(rec.method + " produced no solution");
        rec.final_value = res.value;
        rec.x = res.x;
        rec.termination = to_string(res.proof);
        rec.bound = res.bound;
        if (!res.x.empty()) rec.timeline.push_back({elapsed(), res.value});
    }
    rec.wall_s = elapsed();
    return rec;
}

// Runs `body`, mapping the error taxonomy onto exit codes.
template <class F>
int guarded(CLI::App& app, const std::vector<std::string>& args, std::ostream& out, std::ostream& err, F&& body) {
    try {
        std::vector<std::string> rev(args.rbegin(), args.rend());
        app.parse(rev);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n" << app.help();
        return kUsage;
    }
    try {
        return body();
    } catch (const DomainError& e) {
        err << "infeasible: " << e.what() << "\n";
        return kInfeasible;
    } catch (const SolverFailure& e) {
        err << "solver failure: " << e.what() << "\n";
        return kSolverFailure;
    } catch (const LpError& e) {
        err << "solver failure: " << e.what() << "\n";
        return kSolverFailure;
    } catch (const CLI::ValidationError& e) {
        err << "error: " << e.what() << "\n";
        return kUsage;
    } catch (const NetworkError& e) {
        err << "error: " << e.what() << "\n";
        return kUsage;
    } catch (const std::invalid_argument& e) {
        err << "error: " << e.what() << "\n";
        return kUsage;
    }
}

void emit(const RunRecord& rec, const std::optional<std::string>& out_path,
          const std::optional<std::string>& timeline_path, std::ostream& out) {
    if (!out_path) {
        out << to_json(rec).dump(2) << '\n';
        return;
    }
    {
        std::ofstream f(*out_path);
        if (!f) throw std::invalid_argument("cannot write " + *out_path);
        f << to_json(rec).dump(2) << '\n';
    }
    std::string tl = timeline_path.value_or(
        std::filesystem::path(*out_path).replace_extension(".timeline.csv").string());
    std::ofstream f(tl);
    if (!f) throw std::invalid_argument("cannot write " + tl);
    write_timeline_csv(rec, f);
    out << rec.method << ": final value " << fmt(rec.final_value) << " (" << rec.termination << ")";
    if (rec.adversarial_found) out << (*rec.adversarial_found ? ", adversarial input found" : ", no adversarial input");
    out << '\n';
}

}  // namespace

// --- commands ------------------------------------------------------------------

int cmd_optimize(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Maximize a linear objective over a network's outputs", "rwalk optimize"};
    std::string network_path, objective = "output:0", domain_text;
    std::optional<std::string> out_path, timeline_path;
    MethodOptions o;
    app.add_option("--network", network_path, "network JSON document")->required();
    app.add_option("--objective", objective, "c vector (comma-separated) or output:k");
    app.add_option("--domain", domain_text, "box:lo,hi or l1:<anchor file>,<radius>");
    app.add_option("--out", out_path, "RunRecord JSON path (default: stdout)");
    app.add_option("--timeline", timeline_path, "timeline CSV path (default: next to --out)");
    add_method_options(app, o);

    return guarded(app, args, out, err, [&] {
        const Network net = load_network_file(network_path);
        const Objective obj = parse_objective(objective, net.output_dim());
        const InputDomain domain = parse_domain(domain_text, net);
        RunRecord rec = run_method(net, domain, obj, o);
        rec.network = network_path;
        emit(rec, out_path, timeline_path, out);
        return int{kOk};
    });
}

int cmd_adversary(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Search for an input near an anchor that raises a target class above the true class",
                 "rwalk adversary"};
    std::string network_path, anchor_path, box_text;
    std::optional<std::string> out_path, timeline_path;
    std::size_t true_class = 0, target_class = 0;
    double radius = 5.0;
    MethodOptions o;
    app.add_option("--network", network_path, "network JSON document")->required();
    app.add_option("--anchor", anchor_path, "JSON array with the anchor input")->required();
    app.add_option("--true-class", true_class, "predicted label c")->required();
    app.add_option("--target-class", target_class, "label w to promote")->required();
    app.add_option("--delta", radius, "L1 radius around the anchor")->check(CLI::NonNegativeNumber);
    app.add_option("--box", box_text, "input box lo,hi (default: network metadata)");
    app.add_option("--out", out_path, "RunRecord JSON path (default: stdout)");
    app.add_option("--timeline", timeline_path, "timeline CSV path (default: next to --out)");
    add_method_options(app, o);

    return guarded(app, args, out, err, [&] {
        const Network net = load_network_file(network_path);
        const std::size_t m = net.output_dim();
        if (true_class >= m || target_class >= m)
            throw CLI::ValidationError("--true-class/--target-class",
                                       "class index out of range for " + std::to_string(m) + " outputs");
        if (true_class == target_class)
            throw CLI::ValidationError("--target-class", "target class must differ from the true class");
        Objective obj{std::vector<double>(m, 0.0)};
        obj.c[target_class] = 1.0;
        obj.c[true_class] = -1.0;

        std::optional<std::pair<double, double>> box;
        if (!box_text.empty()) box = parse_interval(box_text);
        L1Ball ball{load_anchor_file(anchor_path), radius};
        if (ball.anchor.size() != net.input_dim())
            throw CLI::ValidationError("--anchor", "anchor dimension does not match the network");
        Box b;
        if (box)
            b = InputDomain::uniform_box(net.input_dim(), box->first, box->second).box;
        else if (net.input_box())
            b = *net.input_box();
        else
            b = InputDomain{Box{ball.anchor, ball.anchor}, std::nullopt}.box;
        if (!box && !net.input_box())
            for (std::size_t i = 0; i < b.dim(); ++i) {
                b.lo[i] -= radius;
                b.hi[i] += radius;
            }
        const InputDomain domain{std::move(b), std::move(ball)};

        RunRecord rec = run_method(net, domain, obj, o);
        rec.network = network_path;
        rec.config["true_class"] = true_class;
        rec.config["target_class"] = target_class;
        rec.adversarial_found = rec.final_value > 0.0;
        emit(rec, out_path, timeline_path, out);
        return int{kOk};
    });
}

int cmd_random_experiment(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Optimize the output of seeded random networks", "rwalk random-experiment"};
    std::vector<std::size_t> n0s, depths, widths;
    std::vector<std::string> methods{"rw"};
    std::size_t nets_per_config = 5;
    std::string box_text = "-1,1";
    std::optional<std::string> out_path;
    MethodOptions o;
    app.add_option("--n0", n0s, "input sizes")->delimiter(',')->required();
    app.add_option("--depth", depths, "hidden layer counts")->delimiter(',')->required();
    app.add_option("--width", widths, "hidden layer widths")->delimiter(',')->required();
    app.add_option("--nets-per-config", nets_per_config, "networks per configuration");
    app.add_option("--methods", methods, "rw, enum, bnb")->delimiter(',')->check(CLI::IsMember({"rw", "enum", "bnb"}));
    app.add_option("--box", box_text, "input box lo,hi applied to every coordinate");
    app.add_option("--out", out_path, "experiment CSV path (default: stdout)");
    add_method_options(app, o);

    return guarded(app, args, out, err, [&] {
        const auto [lo, hi] = parse_interval(box_text);
        struct Job {
            std::size_t config, n0, depth, width, net;
            std::size_t method;
        };
        std::vector<Job> jobs;
        std::size_t config = 0;
        for (std::size_t n0 : n0s)
            for (std::size_t depth : depths)
                for (std::size_t width : widths) {
                    for (std::size_t k = 0; k < nets_per_config; ++k)
                        for (std::size_t m = 0; m < methods.size(); ++m) jobs.push_back({config, n0, depth, width, k, m});
                    ++config;
                }

        std::vector<ExperimentRow> rows(jobs.size());
        const auto njobs = static_cast<std::int64_t>(jobs.size());
#pragma omp parallel for schedule(dynamic)
        for (std::int64_t j = 0; j < njobs; ++j) {
            const Job& job = jobs[static_cast<std::size_t>(j)];
            const std::uint64_t net_seed = split_seed(o.seed, {job.n0, job.depth, job.width, job.net});
            ExperimentRow& row = rows[static_cast<std::size_t>(j)];
            row = {job.n0, job.depth, job.width, net_seed, method_name(methods[job.method]), std::nan(""), 0, 0.0, ""};
            try {
                const Network net = random_network({job.n0, job.depth, job.width, net_seed, 1});
                MethodOptions mo = o;
                mo.method = methods[job.method];
                mo.seed = split_seed(o.seed, {job.n0, job.depth, job.width, job.net, std::hash<std::string>{}(mo.method)});
                const RunRecord rec = run_method(net, InputDomain::uniform_box(job.n0, lo, hi), Objective{{1.0}}, mo);
                row.method = rec.method;
                row.final_value = rec.final_value;
                row.local_search_count = rec.local_search_count;
                row.wall_s = rec.wall_s;
                row.termination = rec.termination;
            } catch (const std::exception& e) {
                row.termination = std::string("error:") + e.what();
                for (char& ch : row.termination)
                    if (ch == ',' || ch == '\n') ch = ';';
            }
        }

        if (out_path) {
            std::ofstream f(*out_path);
            if (!f) throw std::invalid_argument("cannot write " + *out_path);
            write_experiment_csv(rows, f);
            out << rows.size() << " runs written to " << *out_path << '\n';
        } else {
            write_experiment_csv(rows, out);
        }
        return int{kOk};
    });
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    const std::string usage =
        "usage: rwalk <command> [options]\n"
        "commands:\n"
        "  optimize           maximize c.f(x) over a box or L1-ball domain\n"
        "  random-experiment  batch runs over seeded random networks, CSV output\n"
        "  adversary          maximize y_target - y_true within an L1 ball around an anchor\n"
        "run 'rwalk <command> --help' for options\n";
    if (args.empty()) {
        err << usage;
        return kUsage;
    }
    const std::vector<std::string> rest(args.begin() + 1, args.end());
    if (args[0] == "optimize") return cmd_optimize(rest, out, err);
    if (args[0] == "random-experiment") return cmd_random_experiment(rest, out, err);
    if (args[0] == "adversary") return cmd_adversary(rest, out, err);
    if (args[0] == "--help" || args[0] == "-h") {
        out << usage;
        return kOk;
    }
    err << "unknown command '" << args[0] << "'\n" << usage;
    return kUsage;
}

}  // namespace rwalk::cli
