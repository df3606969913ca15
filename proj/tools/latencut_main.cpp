#include <algorithm>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "latencut/acc.hpp"
#include "latencut/cost.hpp"
#include "latencut/model.hpp"
#include "latencut/runner.hpp"
#include "latencut/schedule.hpp"

namespace {

using namespace latencut;
using nlohmann::json;

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return std::move(ss).str();
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << text;
    if (!out) throw std::runtime_error("cannot write " + path);
}

std::vector<int> ids_from_json(const json& j) {
    if (!j.is_object() || !j.contains("ids") || !j["ids"].is_array())
        throw std::runtime_error("expected an object of the form {\"ids\": [ints]}");
    return j["ids"].get<std::vector<int>>();
}

std::vector<int> ids_from_line(const std::string& line) {
    std::istringstream ss(line);
    std::vector<int> ids;
    int v = 0;
    while (ss >> v) ids.push_back(v);
    if (!ss.eof()) throw std::runtime_error("bad token in id line: " + line);
    return ids;
}

// Either one JSON object {"ids": [...]}, or a batch with one sequence per
// line (each line a {"ids": ...} object or whitespace-separated ids).
std::vector<std::vector<int>> read_inputs(const std::string& path) {
    const std::string text = read_file(path);
    std::vector<std::vector<int>> inputs;
    if (json whole = json::parse(text, nullptr, false); !whole.is_discarded()) {
        inputs.push_back(ids_from_json(whole));
        return inputs;
    }
    std::istringstream ss(text);
    std::string line;
    while (std::getline(ss, line)) {
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos) continue;
        inputs.push_back(line[first] == '{' ? ids_from_json(json::parse(line))
                                            : ids_from_line(line));
    }
    if (inputs.empty()) throw std::runtime_error(path + " holds no input sequences");
    return inputs;
}

// start:stop:step, endpoint-inclusive within 1e-9
std::vector<double> parse_range(const std::string& spec) {
    double start = 0, stop = 0, step = 0;
    char c1 = 0, c2 = 0;
    std::istringstream ss(spec);
    if (!(ss >> start >> c1 >> stop >> c2 >> step) || c1 != ':' || c2 != ':' || !(ss >> std::ws).eof())
        throw std::runtime_error("range must look like start:stop:step, got " + spec);
    if (step <= 0) throw std::runtime_error("range step must be positive");
    if (stop < start - 1e-9) throw std::runtime_error("range stop lies before start");
    std::vector<double> grid;
    for (int i = 0; start + i * step <= stop + 1e-9; ++i) grid.push_back(start + i * step);
    return grid;
}

Policy policy_from_flag(const std::string& s) {
    if (s == "sv") return Policy::sv_sort;
    if (s == "random") return Policy::random_sort;
    return Policy::tail_truncate;
}

Placement placement_from_flag(const std::string& s) {
    return s == "mid" ? Placement::mid_attention : Placement::post_concat;
}

ModelConfig config_or_default(const std::string& path) {
    return path.empty() ? ModelConfig{} : load_config_file(path);
}

// ---------------------------------------------------------------- commands

struct GenArgs {
    std::string config, out;
    uint64_t seed = 0;
};

void cmd_gen(const GenArgs& a) {
    const ModelConfig c = config_or_default(a.config);
    const WeightStore w = generate_random_model(c, a.seed);
    save_model(c, w, a.out);
    std::cout << "wrote " << a.out << " (" << parameter_count(w) << " parameters, "
              << to_string(c.mode) << " " << c.num_layers << "x" << c.hidden_size << "x"
              << c.num_heads << ")\n";
}

struct FlopsArgs {
    std::string config, variant = "paper", json_out, csv_out;
    int seq_len = 512;
};

void cmd_flops(const FlopsArgs& a) {
    const ModelConfig c = config_or_default(a.config);
    const CostReport r = analytic_flops(c, a.seq_len, flops_variant_from_string(a.variant));
    const std::pair<const char*, double> rows[] = {
        {"embedding", r.embedding},   {"attention-self", r.attention_self},
        {"attention-output", r.attention_output}, {"intermediate", r.intermediate},
        {"output", r.output},         {"pooler", r.pooler},
        {"classifier", r.classifier}, {"total", r.total()},
    };
    std::cout << "analytic FLOPs: L=" << c.num_layers << " H=" << c.hidden_size
              << " A=" << c.num_heads << " I=" << c.intermediate_size << " T=" << a.seq_len
              << " variant=" << to_string(r.variant) << "\n\n";
    char line[128];
    for (const auto& [name, flops] : rows) {
        std::snprintf(line, sizeof line, "%-18s %16.6e  %10.6f%%\n", name, flops,
                      100.0 * r.share(flops));
        std::cout << line;
    }
    std::snprintf(line, sizeof line,
                  "\nencoder split: attention-self %.6f%%, feed-forward %.6f%%\n",
                  100.0 * r.attention_share_of_encoder(),
                  100.0 * r.feed_forward_share_of_encoder());
    std::cout << line;
    std::snprintf(line, sizeof line, "attention-self formulas: paper %.6e, corrected %.6e\n",
                  r.attention_self_paper, r.attention_self_corrected);
    std::cout << line;
    if (!a.json_out.empty()) write_file(a.json_out, cost_report_to_json(r).dump(2) + "\n");
    if (!a.csv_out.empty()) write_file(a.csv_out, cost_report_to_csv(r));
}

struct AccArgs {
    std::string model, inputs, out, csv_out;
    bool causal = false;
};

void cmd_acc(const AccArgs& a) {
    const Model m = load_model(a.model);
    const auto inputs = read_inputs(a.inputs);
    const Mode mode = a.causal ? Mode::decoder : m.config.mode;
    const AccProfile p = profile_model(m, inputs, mode);
    write_file(a.out, profile_to_json(p).dump(2) + "\n");
    if (!a.csv_out.empty()) write_file(a.csv_out, profile_to_csv(p));
    std::cout << "profiled " << inputs.size() << " sequence(s), " << to_string(mode)
              << " scoring\n";
    char line[96];
    for (int l = 0; l < p.layers(); ++l) {
        std::snprintf(line, sizeof line, "layer %2d  e_acc %.6f  p_acc %.6f\n", l + 1,
                      p.e_acc[size_t(l)], p.p_acc[size_t(l)]);
        std::cout << line;
    }
    if (p.degenerate_fit) std::cout << "note: fewer than 3 layers, constant fit used\n";
}

struct ScheduleArgs {
    std::string profile, pinned = "first", out;
    double alpha_sc = 1.0;
};

void cmd_schedule(const ScheduleArgs& a) {
    const AccProfile p = profile_from_json(json::parse(read_file(a.profile)));
    const EliminationProfile ep = elimination_profile(p);
    const PruneSchedule s = make_schedule(ep, a.alpha_sc, pinned_policy_from_string(a.pinned));
    write_file(a.out, schedule_to_json(s).dump(2) + "\n");
    char line[96];
    for (int l = 0; l < s.layers(); ++l) {
        std::snprintf(line, sizeof line, "layer %2d  alpha_ep %.6f  alpha_er %.6f\n", l + 1,
                      s.alpha_ep[size_t(l)], s.alpha_er[size_t(l)]);
        std::cout << line;
    }
    if (s.halted_at)
        std::cout << "elimination halts at layer " << *s.halted_at << " (contribution rebound)\n";
    if (const auto out_of_band = band_exits(s); !out_of_band.empty()) {
        std::cout << "rates outside the effective [0.77, 0.97] band at layer(s):";
        for (int l : out_of_band) std::cout << " " << l;
        std::cout << "\n";
    }
}

struct RunArgs {
    std::string model, inputs, schedule, policy = "sv", placement = "post", out, csv_out;
    uint64_t seed = 0;
    bool measure = false, count_flops = false;
    int repeats = 5, warmup = 1;
};

void cmd_run(const RunArgs& a) {
    const Model m = load_model(a.model);
    const PreparedModel pm = prepare(m);
    const auto inputs = read_inputs(a.inputs);
    const PruneSchedule s = schedule_from_json(json::parse(read_file(a.schedule)));
    RunOptions opt;
    opt.policy = policy_from_flag(a.policy);
    opt.placement = placement_from_flag(a.placement);
    opt.seed = a.seed;
    opt.count_flops = a.count_flops;
    RunOptions timing = opt;
    timing.count_flops = false;

    json reports = json::array();
    std::string csv = "alpha_sc,predicted_speedup,measured_speedup,pw_total,latency_ns\n";
    char line[160];
    for (size_t i = 0; i < inputs.size(); ++i) {
        const RunReport r = forward_pruned(pm, inputs[i], s, opt);
        const double predicted = double(r.input_length) * m.config.num_layers / r.pw_total;
        json jr = run_report_to_json(r);
        jr["predicted_speedup"] = predicted;
        if (a.measure) {
            const LatencyStats base =
                measure_latency(pm, inputs[i], nullptr, a.repeats, a.warmup, timing);
            const LatencyStats pruned =
                measure_latency(pm, inputs[i], &s, a.repeats, a.warmup, timing);
            const double measured = base.median_ns / pruned.median_ns;
            jr["baseline_median_ns"] = base.median_ns;
            jr["pruned_median_ns"] = pruned.median_ns;
            jr["measured_speedup"] = measured;
            std::snprintf(line, sizeof line, "%.10g,%.17g,%.17g,%.17g,%.17g\n", s.alpha_sc,
                          predicted, measured, r.pw_total, pruned.median_ns);
            csv += line;
            std::snprintf(line, sizeof line,
                          "input %zu: T=%d pw=%.2f predicted x%.4f measured x%.4f\n", i,
                          r.input_length, r.pw_total, predicted, measured);
        } else {
            std::snprintf(line, sizeof line, "input %zu: T=%d pw=%.2f predicted x%.4f\n", i,
                          r.input_length, r.pw_total, predicted);
        }
        std::cout << line;
        reports.push_back(std::move(jr));
    }
    write_file(a.out, reports.dump(2) + "\n");
    if (!a.csv_out.empty()) write_file(a.csv_out, csv);
}

struct SweepArgs {
    std::string model, inputs, profile, range, pinned = "first", policy = "sv",
                placement = "post", out;
    uint64_t seed = 0;
    int repeats = 5, warmup = 1;
};

double median_of(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

void cmd_sweep(const SweepArgs& a) {
    if (a.repeats < 1) throw std::invalid_argument("sweep needs --repeats >= 1");
    if (a.warmup < 1) throw std::invalid_argument("sweep needs --warmup >= 1");
    const Model m = load_model(a.model);
    const PreparedModel pm = prepare(m);
    const auto inputs = read_inputs(a.inputs);
    // the contribution profile is measured once; every grid point only
    // rescales it
    const EliminationProfile ep = elimination_profile(profile_from_json(json::parse(read_file(a.profile))));
    const std::vector<double> grid = parse_range(a.range);
    RunOptions opt;
    opt.policy = policy_from_flag(a.policy);
    opt.placement = placement_from_flag(a.placement);
    opt.seed = a.seed;

    std::vector<PruneSchedule> schedules;
    schedules.reserve(grid.size());
    for (const double alpha : grid)
        schedules.push_back(make_schedule(ep, alpha, pinned_policy_from_string(a.pinned)));

    auto batch_ns = [&](const PruneSchedule* s) {
        double total = 0.0;
        for (const auto& ids : inputs)
            total += (s ? forward_pruned(pm, ids, *s, opt) : forward_baseline(pm, ids, opt))
                         .latency_ns;
        return total;
    };

    // Timed round-robin: each round does one baseline pass plus one pass per
    // grid point, so slow spells of the machine land on every point about
    // equally instead of skewing whichever alpha happened to be under the
    // clock. Medians are then taken per point across rounds.
    for (int w = 0; w < a.warmup; ++w) {
        batch_ns(nullptr);
        for (const auto& s : schedules) batch_ns(&s);
    }
    std::vector<double> base_ns(static_cast<size_t>(a.repeats));
    std::vector<std::vector<double>> pruned_ns(grid.size(),
                                               std::vector<double>(static_cast<size_t>(a.repeats)));
    for (int r = 0; r < a.repeats; ++r) {
        base_ns[size_t(r)] = batch_ns(nullptr);
        for (size_t i = 0; i < schedules.size(); ++i) pruned_ns[i][size_t(r)] = batch_ns(&schedules[i]);
    }
    const double base_median = median_of(base_ns);

    std::string csv = "alpha_sc,predicted_speedup,measured_speedup,pw_total,latency_ns\n";
    char line[160];
    for (size_t i = 0; i < grid.size(); ++i) {
        double pw = 0.0, pw_base = 0.0;
        for (const auto& ids : inputs) {
            pw += processed_words(retention_plan(schedules[i], int(ids.size()))).pw_total;
            pw_base += double(ids.size()) * m.config.num_layers;
        }
        const double predicted = pw_base / pw;
        const double pruned_median = median_of(pruned_ns[i]);
        const double measured = base_median / pruned_median;
        std::snprintf(line, sizeof line, "%.10g,%.17g,%.17g,%.17g,%.17g\n", grid[i], predicted,
                      measured, pw, pruned_median);
        csv += line;
        std::snprintf(line, sizeof line, "alpha_sc %.10g: predicted x%.4f measured x%.4f\n",
                      grid[i], predicted, measured);
        std::cout << line;
    }
    write_file(a.out, csv);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"latency-adjustable transformer attention: inference engine and cost models"};
    app.require_subcommand(1);

    GenArgs gen;
    auto* g = app.add_subcommand("gen", "write a randomly initialized model container");
    g->add_option("--config", gen.config, "model config JSON (default: stock 12x768x12 encoder)");
    g->add_option("--seed", gen.seed, "RNG seed");
    g->add_option("--out", gen.out, "output .latx path")->required();
    g->callback([&] { cmd_gen(gen); });

    FlopsArgs flops;
    auto* f = app.add_subcommand("flops", "print the analytic per-sublayer FLOPs table");
    f->add_option("--config", flops.config, "model config JSON");
    f->add_option("--seq-len", flops.seq_len, "sequence length T")->check(CLI::NonNegativeNumber);
    f->add_option("--variant", flops.variant, "attention-self formula")
        ->check(CLI::IsMember({"paper", "corrected"}));
    f->add_option("--json", flops.json_out, "write the report as JSON");
    f->add_option("--csv", flops.csv_out, "write the report as CSV");
    f->callback([&] { cmd_flops(flops); });

    AccArgs acc;
    auto* c = app.add_subcommand("acc", "profile per-layer attention context contribution");
    c->add_option("--model", acc.model, "model .latx path")->required();
    c->add_option("--inputs", acc.inputs, "input sequences file")->required();
    c->add_flag("--causal", acc.causal, "force causal (decoder) scoring");
    c->add_option("--out", acc.out, "output profile JSON")->required();
    c->add_option("--csv", acc.csv_out, "also write layer,e_acc,p_acc CSV");
    c->callback([&] { cmd_acc(acc); });

    ScheduleArgs sched;
    auto* s = app.add_subcommand("schedule", "turn a contribution profile into per-layer rates");
    s->add_option("--profile", sched.profile, "profile JSON from `acc`")->required();
    s->add_option("--alpha-sc", sched.alpha_sc, "speed coefficient (> 0)");
    s->add_option("--pinned", sched.pinned, "position pinned through every elimination")
        ->check(CLI::IsMember({"first", "last", "none"}));
    s->add_option("--out", sched.out, "output schedule JSON")->required();
    s->callback([&] { cmd_schedule(sched); });

    RunArgs run;
    auto* r = app.add_subcommand("run", "run the pruned forward pass");
    r->add_option("--model", run.model)->required();
    r->add_option("--inputs", run.inputs)->required();
    r->add_option("--schedule", run.schedule, "schedule JSON from `schedule`")->required();
    r->add_option("--policy", run.policy)->check(CLI::IsMember({"sv", "random", "tail"}));
    r->add_option("--placement", run.placement)->check(CLI::IsMember({"post", "mid"}));
    r->add_option("--seed", run.seed, "seed for the random elimination policy");
    r->add_flag("--measure", run.measure, "also time baseline vs pruned passes");
    r->add_option("--repeats", run.repeats, "timed repeats (>= 3)");
    r->add_option("--warmup", run.warmup, "warmup passes (>= 1)");
    r->add_flag("--count-flops", run.count_flops, "attach instrumented FLOP counts");
    r->add_option("--out", run.out, "output report JSON")->required();
    r->add_option("--csv", run.csv_out, "speedup CSV (needs --measure)")->needs("--measure");
    r->callback([&] { cmd_run(run); });

    SweepArgs sweep;
    auto* w = app.add_subcommand("sweep", "measure speedup across a speed-coefficient grid");
    w->add_option("--model", sweep.model)->required();
    w->add_option("--inputs", sweep.inputs)->required();
    w->add_option("--profile", sweep.profile, "profile JSON (profiled once, reused per point)")
        ->required();
    w->add_option("--alpha-sc-range", sweep.range, "grid as start:stop:step, endpoint inclusive")
        ->required();
    w->add_option("--pinned", sweep.pinned)->check(CLI::IsMember({"first", "last", "none"}));
    w->add_option("--policy", sweep.policy)->check(CLI::IsMember({"sv", "random", "tail"}));
    w->add_option("--placement", sweep.placement)->check(CLI::IsMember({"post", "mid"}));
    w->add_option("--seed", sweep.seed);
    w->add_option("--repeats", sweep.repeats, "timed rounds, interleaved across grid points");
    w->add_option("--warmup", sweep.warmup, "discarded warmup rounds");
    w->add_option("--out", sweep.out, "output CSV path")->required();
    w->callback([&] { cmd_sweep(sweep); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
