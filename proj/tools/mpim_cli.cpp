// mpim: command-line front end for the crossbar simulator and reliability experiments.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <random>
#include <sstream>

#include "mpim/ecc.hpp"
#include "mpim/experiment.hpp"
#include "mpim/fault.hpp"
#include "mpim/microcode.hpp"
#include "mpim/reliability.hpp"
#include "mpim/tmr.hpp"

namespace fs = std::filesystem;
using namespace mpim;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitEccAbort = 2;

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct RunConfig {
    // global
    std::string out = "-";
    std::string format = "csv";
    std::uint64_t seed = 1;
    int jobs = 1;

    // mult
    std::uint32_t bits = 8;
    std::uint64_t a = 0;
    std::uint64_t b = 0;
    std::uint64_t trials = 0;
    double p_gate = 0.0;
    double p_write = 0.0;
    std::string tmr = "none";
    std::string voting = "min3";
    std::uint32_t batch_rows = 256;
    std::string dump_netlist;

    // ecc
    std::size_t n = 64;
    std::size_t m = 16;
    int banks = 3;
    std::vector<std::string> flips;
    double p_input = 0.0;
    std::vector<std::size_t> sizes = {16, 32, 64};

    // tmr-sweep
    std::vector<double> p_gates = {1e-3, 3e-4, 1e-4};
    std::vector<std::string> modes = {"none", "serial", "parallel"};
    std::vector<std::string> votings = {"min3"};
    std::uint64_t sweep_trials = 20000;

    // nn
    std::vector<double> p_mults;
    std::string from_csv;
    double p_mask = 3e-4;
    double mults = 612e6;

    // degradation
    std::vector<double> p_inputs = {1e-9};
    std::vector<double> batches = {1e3};
    std::vector<std::string> ecc_schemes = {"none"};
    double weights = 62.4e6;
    std::uint32_t bits_per_weight = 32;

    // dump-netlist
    std::string program = "mult";
};

/// Generic result table for the non-experiment subcommands.
struct Table {
    std::vector<std::string> columns;
    std::vector<std::vector<nlohmann::ordered_json>> rows;
};

std::string cell_text(const nlohmann::ordered_json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_number_float()) return format_real(v.get<double>());
    if (v.is_boolean()) return v.get<bool>() ? "1" : "0";
    return v.dump();
}

void write_table(std::ostream& os, const Table& t, const std::vector<std::string>& meta, const std::string& format) {
    if (format == "json") {
        nlohmann::ordered_json doc;
        doc["meta"] = meta;
        doc["rows"] = nlohmann::ordered_json::array();
        for (const auto& r : t.rows) {
            nlohmann::ordered_json j;
            for (std::size_t i = 0; i < t.columns.size(); ++i) j[t.columns[i]] = r[i];
            doc["rows"].push_back(std::move(j));
        }
        os << doc.dump(2) << "\n";
        return;
    }
    for (const auto& c : meta) os << "# " << c << "\n";
    for (std::size_t i = 0; i < t.columns.size(); ++i) os << (i ? "," : "") << t.columns[i];
    os << "\n";
    for (const auto& r : t.rows) {
        for (std::size_t i = 0; i < r.size(); ++i) os << (i ? "," : "") << cell_text(r[i]);
        os << "\n";
    }
}

fs::path resolve_output(const std::string& out) {
    fs::path p(out);
    if (p.is_relative()) {
        if (const char* dir = std::getenv("MPIM_OUTPUT_DIR"); dir != nullptr && *dir != '\0') p = fs::path(dir) / p;
    }
    return p;
}

/// Writes through `emit` to stdout or to the resolved --out path.
template <class Emit>
void with_output(const RunConfig& cfg, Emit&& emit) {
    if (cfg.out.empty() || cfg.out == "-") {
        emit(std::cout);
        std::cout.flush();
        return;
    }
    const auto path = resolve_output(cfg.out);
    if (path.has_parent_path()) {
        std::error_code ec;
        fs::create_directories(path.parent_path(), ec);
    }
    std::ostringstream buf;
    emit(buf);
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open output file '" + path.string() + "'");
    os << buf.str();
    if (!os) throw std::runtime_error("failed writing output file '" + path.string() + "'");
}

std::vector<std::string> header(const std::string& command, std::uint64_t seed, std::uint64_t config_hash) {
    char hash[32];
    std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(config_hash));
    return {"tool mpim " + std::string(kVersion), "command " + command, "rng " + std::string(kRngName),
            "seed " + std::to_string(seed), "config_hash " + std::string(hash)};
}

/// Effective configuration as key=value text; worker count and output path
/// do not change results and are left out.
std::uint64_t config_hash(const CLI::App& app, const CLI::App& sub) {
    std::istringstream all(app.config_to_str(true, false));
    std::string canonical = "command=" + sub.get_name() + "\n";
    for (std::string line; std::getline(all, line);) {
        if (line.rfind("jobs=", 0) == 0 || line.rfind("out=", 0) == 0) continue;
        canonical += line + "\n";
    }
    return fnv1a(canonical);
}

FaultConfig fault_config(const RunConfig& cfg) {
    FaultConfig fc;
    fc.p_gate = cfg.p_gate;
    fc.p_write = cfg.p_write;
    fc.p_input = cfg.p_input;
    fc.inject_indirect = cfg.p_input > 0;
    fc.seed = cfg.seed;
    fc.validate();
    return fc;
}

TmrPlan plan_of(const std::string& mode, const std::string& voting) {
    return TmrPlan{parse_tmr_mode(mode), parse_voting(voting)};
}

void emit_rows(const RunConfig& cfg, const std::vector<ExperimentRow>& rows, const std::vector<std::string>& meta) {
    with_output(cfg, [&](std::ostream& os) {
        if (cfg.format == "json") {
            write_json(os, rows, meta);
        } else {
            write_csv(os, rows, meta);
        }
    });
}

// ---------------------------------------------------------------- subcommands

int cmd_gates(const RunConfig& cfg, const std::vector<std::string>& meta) {
    Table t{{"gate", "inputs", "output", "cycles"}, {}};
    for (auto g : {GateKind::Not, GateKind::Nor2, GateKind::Nand2, GateKind::Or2, GateKind::Min3}) {
        const auto k = arity(g);
        const std::uint32_t cases = 1u << k;
        Crossbar xbar(cases, k + 1);
        std::vector<std::uint32_t> lanes(cases), inputs(k);
        std::iota(lanes.begin(), lanes.end(), 0u);
        std::iota(inputs.begin(), inputs.end(), 0u);
        for (std::uint32_t r = 0; r < cases; ++r) {
            for (std::uint32_t i = 0; i < k; ++i) xbar.set(r, i, (r >> (k - 1 - i)) & 1u);
        }
        xbar.apply({GateKind::Init, Orientation::InRow, {}, static_cast<std::uint32_t>(k), lanes});
        xbar.apply({g, Orientation::InRow, inputs, static_cast<std::uint32_t>(k), lanes});
        for (std::uint32_t r = 0; r < cases; ++r) {
            std::string in;
            for (std::uint32_t i = 0; i < k; ++i) in += xbar.get(r, i) ? '1' : '0';
            t.rows.push_back({std::string(to_string(g)), in, xbar.get(r, k), 1});
        }
    }
    with_output(cfg, [&](std::ostream& os) { write_table(os, t, meta, cfg.format); });
    return kExitOk;
}

void dump(const std::string& path, const MicroProgram& prog) {
    std::ofstream os(resolve_output(path));
    if (!os) throw std::runtime_error("cannot open netlist file '" + path + "'");
    write_netlist(os, prog);
}

int cmd_mult(const RunConfig& cfg, const std::vector<std::string>& meta) {
    const auto plan = plan_of(cfg.tmr, cfg.voting);
    if (!cfg.dump_netlist.empty()) dump(cfg.dump_netlist, build_multiplier(cfg.bits));

    if (cfg.trials > 0) {
        MonteCarloConfig mc;
        mc.bit_width = cfg.bits;
        mc.p_gate = cfg.p_gate;
        mc.p_write = cfg.p_write;
        mc.trials = cfg.trials;
        mc.plan = plan;
        mc.seed = cfg.seed;
        mc.batch_rows = cfg.batch_rows;
        const auto r = cfg.jobs > 1 ? estimate_p_mult_parallel(mc, cfg.jobs) : estimate_p_mult(mc);
        emit_rows(cfg, {to_row(r, "mult")}, meta);
        return kExitOk;
    }

    if (cfg.bits < 1 || cfg.bits > 32) throw ConfigError("bits must be in [1, 32]");
    const std::uint64_t mask = (1ull << cfg.bits) - 1;
    if ((cfg.a & ~mask) || (cfg.b & ~mask)) throw ConfigError("a and b must fit in bits=" + std::to_string(cfg.bits));
    const auto prog = build_multiplier(cfg.bits);
    const std::uint32_t lanes[] = {0};
    const auto fp = footprint(prog, plan, lanes);
    Crossbar xbar(fp.rows, fp.cols);
    load_word(xbar, 0, prog.input("a"), cfg.a);
    load_word(xbar, 0, prog.input("b"), cfg.b);
    FaultInjector faults(fault_config(cfg));
    const auto res = run_tmr(prog, xbar, lanes, &faults, plan);
    const auto product = res.word(prog, 0);
    Table t{{"a", "b", "product", "expected", "correct", "mode", "voting", "cycles", "area_cells", "gate_faults"}, {}};
    t.rows.push_back({cfg.a, cfg.b, product, cfg.a * cfg.b, product == cfg.a * cfg.b, cfg.tmr,
                      plan.mode == TmrMode::None ? "none" : cfg.voting, res.cycles, res.area_cells,
                      faults.fault_count(FaultInjector::Channel::Gate)});
    with_output(cfg, [&](std::ostream& os) { write_table(os, t, meta, cfg.format); });
    return kExitOk;
}

Cell parse_cell(const std::string& s, std::size_t n) {
    const auto colon = s.find(':');
    try {
        if (colon == std::string::npos) throw std::invalid_argument(s);
        const auto r = std::stoul(s.substr(0, colon));
        const auto c = std::stoul(s.substr(colon + 1));
        if (r >= n || c >= n) throw std::invalid_argument(s);
        return {static_cast<std::uint32_t>(r), static_cast<std::uint32_t>(c)};
    } catch (const std::logic_error&) {
        throw ConfigError("flip '" + s + "' is not row:col inside the crossbar");
    }
}

Table report_table(const EccReport& rep) {
    Table t{{"block_row", "block_col", "status", "corrected", "candidates", "cycles"}, {}};
    auto cells = [](const std::vector<Cell>& v) {
        std::string s;
        for (const auto& c : v) s += (s.empty() ? "" : " ") + std::to_string(c.row) + ":" + std::to_string(c.col);
        return s;
    };
    for (const auto& b : rep.blocks) {
        if (b.status == BlockStatus::Clean) continue;
        t.rows.push_back({b.block_row, b.block_col, std::string(to_string(b.status)), cells(b.corrected),
                          cells(b.candidates), rep.cycles});
    }
    return t;
}

int cmd_ecc_verify(const RunConfig& cfg, const std::vector<std::string>& meta, bool random_flips) {
    const BlockGeometry geom(cfg.n, cfg.m);
    Crossbar xbar(cfg.n);
    std::mt19937_64 rng(derive_seed(cfg.seed, 0xda7a));
    for (std::size_t r = 0; r < cfg.n; ++r) {
        for (std::size_t c = 0; c < cfg.n; ++c) xbar.set(r, c, static_cast<std::uint8_t>(rng() & 1u));
    }
    const auto banks = encode(xbar, geom, cfg.banks);
    if (random_flips) {
        FaultConfig fc = fault_config(cfg);
        fc.inject_direct = false;
        fc.inject_indirect = true;
        FaultInjector f(fc);
        std::vector<std::uint8_t> bits(cfg.n * cfg.n);
        for (std::size_t i = 0; i < bits.size(); ++i) bits[i] = xbar.get(i / cfg.n, i % cfg.n);
        f.corrupt_on_access(bits);
        for (std::size_t i = 0; i < bits.size(); ++i) xbar.set(i / cfg.n, i % cfg.n, bits[i]);
    } else {
        for (const auto& s : cfg.flips) {
            const auto c = parse_cell(s, cfg.n);
            xbar.flip(c.row, c.col);
        }
    }
    const auto rep = verify_and_correct(xbar, banks, {0, 0, cfg.n, cfg.n});
    with_output(cfg, [&](std::ostream& os) { write_table(os, report_table(rep), meta, cfg.format); });
    if (rep.uncorrectable()) {
        std::cerr << "mpim: " << rep.count(BlockStatus::Uncorrectable) << " uncorrectable block(s)\n";
        return kExitEccAbort;
    }
    return kExitOk;
}

int cmd_ecc_overhead(const RunConfig& cfg, const std::vector<std::string>& meta) {
    const EccCycleModel model;
    Table t{{"n", "m", "orientation", "diagonal_cycles", "naive_cycles"}, {}};
    for (auto n : cfg.sizes) {
        Crossbar xbar(n);
        auto banks = encode(xbar, BlockGeometry(n, cfg.m), cfg.banks);
        auto naive = encode_naive(xbar);
        for (auto o : {Orientation::InRow, Orientation::InColumn}) {
            std::vector<Change> changes;
            for (std::uint32_t k = 0; k < n; ++k) {
                changes.push_back(o == Orientation::InRow ? Change{k, 0, 0, 1} : Change{0, k, 0, 1});
            }
            const auto d = update_incremental(banks, changes, model);
            const auto h = update_naive_horizontal(naive, changes, model).cycles;
            t.rows.push_back({n, cfg.m, std::string(to_string(o)), d, h});
        }
    }
    with_output(cfg, [&](std::ostream& os) { write_table(os, t, meta, cfg.format); });
    return kExitOk;
}

int cmd_tmr_sweep(const RunConfig& cfg, const std::vector<std::string>& meta) {
    TmrSweepConfig s;
    s.bit_width = cfg.bits;
    s.p_gates = cfg.p_gates;
    for (const auto& m : cfg.modes) s.modes.push_back(parse_tmr_mode(m));
    s.votings.clear();
    for (const auto& v : cfg.votings) s.votings.push_back(parse_voting(v));
    s.trials = cfg.sweep_trials;
    s.seed = cfg.seed;
    s.batch_rows = cfg.batch_rows;
    emit_rows(cfg, tmr_sweep(s, cfg.jobs), meta);
    return kExitOk;
}

int cmd_nn(const RunConfig& cfg, const std::vector<std::string>& meta) {
    NnModelParams p;
    p.p_mask = cfg.p_mask;
    p.multiplications = cfg.mults;
    std::vector<ExperimentRow> in;
    for (double pm : cfg.p_mults) {
        ExperimentRow r;
        r.experiment = "p_mult";
        r.mode = "none";
        r.voting = "none";
        r.p_hat = r.ci_lo = r.ci_hi = pm;
        r.seed = cfg.seed;
        in.push_back(r);
    }
    if (!cfg.from_csv.empty()) {
        std::ifstream is(cfg.from_csv);
        if (!is) throw std::runtime_error("cannot open '" + cfg.from_csv + "'");
        const auto rows = read_csv(is);
        in.insert(in.end(), rows.begin(), rows.end());
    }
    if (in.empty()) throw ConfigError("nn needs --p-mult or --from-csv");
    emit_rows(cfg, nn_sweep(p, in), meta);
    return kExitOk;
}

int cmd_degradation(const RunConfig& cfg, const std::vector<std::string>& meta) {
    DegradationSweepConfig d;
    d.params.weights = cfg.weights;
    d.params.bits_per_weight = cfg.bits_per_weight;
    d.params.block = static_cast<std::uint32_t>(cfg.m);
    d.p_inputs = cfg.p_inputs;
    d.batches = cfg.batches;
    d.schemes.clear();
    for (const auto& s : cfg.ecc_schemes) d.schemes.push_back(parse_ecc_scheme(s));
    emit_rows(cfg, degradation_sweep(d), meta);
    return kExitOk;
}

int cmd_dump_netlist(const RunConfig& cfg) {
    MicroProgram prog;
    if (cfg.program == "mult") {
        prog = build_multiplier(cfg.bits);
    } else if (cfg.program == "full-adder") {
        prog = build_full_adder();
    } else {
        throw ConfigError("program must be mult or full-adder");
    }
    with_output(cfg, [&](std::ostream& os) { write_netlist(os, prog); });
    return kExitOk;
}

auto probability() { return CLI::Range(0.0, 1.0); }

}  // namespace

int main(int argc, char** argv) {
    RunConfig cfg;
    CLI::App app{"Fault-injection simulator for memristive processing-in-memory", "mpim"};
    app.set_version_flag("--version", std::string(kVersion));
    app.set_config("--config", "", "TOML/INI configuration file; flags override its values");
    app.allow_config_extras(CLI::config_extras_mode::error);
    app.option_defaults()->always_capture_default();
    app.require_subcommand(1);
    app.fallthrough();

    app.add_option("--out,-o", cfg.out, "Output file ('-' for stdout); relative paths resolve under $MPIM_OUTPUT_DIR");
    app.add_option("--format", cfg.format, "Output format")->check(CLI::IsMember({"csv", "json"}));
    app.add_option("--seed", cfg.seed, "Master seed");
    app.add_option("--jobs,-j", cfg.jobs, "OpenMP worker threads for Monte Carlo trials")->check(CLI::PositiveNumber);

    auto* gates = app.add_subcommand("gates", "Truth tables of the stateful gates, evaluated on a crossbar");

    auto* mult = app.add_subcommand("mult", "One multiplication, or a batch of fault-injected trials with --trials");
    mult->add_option("--bits", cfg.bits, "Operand width")->check(CLI::Range(1, 32));
    mult->add_option("--a", cfg.a, "First operand");
    mult->add_option("--b", cfg.b, "Second operand");
    mult->add_option("--trials", cfg.trials, "Monte Carlo trials (0 = single multiplication)");
    mult->add_option("--p-gate", cfg.p_gate, "Gate fault probability")->check(probability());
    mult->add_option("--p-write", cfg.p_write, "INIT fault probability")->check(probability());
    mult->add_option("--tmr", cfg.tmr, "Redundancy mode")->check(CLI::IsMember({"none", "serial", "parallel", "semi"}));
    mult->add_option("--voting", cfg.voting, "Voter")->check(CLI::IsMember({"min3", "ideal"}));
    mult->add_option("--batch-rows", cfg.batch_rows, "Trials per crossbar batch")->check(CLI::PositiveNumber);
    mult->add_option("--dump-netlist", cfg.dump_netlist, "Also write the multiplier netlist to this file");

    auto* ecc = app.add_subcommand("ecc", "Diagonal-parity ECC tools");
    ecc->require_subcommand(1);
    auto add_geometry = [&](CLI::App* sub) {
        sub->add_option("--n", cfg.n, "Crossbar side")->check(CLI::PositiveNumber);
        sub->add_option("--m", cfg.m, "Block side")->check(CLI::Range(2, 4096));
        sub->add_option("--banks", cfg.banks, "Parity banks per block (2 reproduces the ambiguous scheme)")
            ->check(CLI::IsMember({2, 3}));
    };
    auto* verify = ecc->add_subcommand("verify", "Flip the listed cells of random data and run the decoder");
    add_geometry(verify);
    verify->add_option("--flip", cfg.flips, "Cells to flip, row:col")->delimiter(',');
    auto* inject = ecc->add_subcommand("inject", "Corrupt random data with per-cell probability and decode");
    add_geometry(inject);
    inject->add_option("--p-input", cfg.p_input, "Per-cell flip probability")->check(probability());
    auto* overhead = ecc->add_subcommand("overhead", "Parity update cycles, diagonal vs naive horizontal");
    overhead->add_option("--n", cfg.sizes, "Crossbar sides")->delimiter(',');
    overhead->add_option("--m", cfg.m, "Block side")->check(CLI::Range(2, 4096));
    overhead->add_option("--banks", cfg.banks, "Parity banks per block")->check(CLI::IsMember({2, 3}));

    auto* sweep = app.add_subcommand("tmr-sweep", "Monte Carlo p_mult over a p_gate x mode x voting grid");
    sweep->add_option("--bits", cfg.bits, "Operand width")->check(CLI::Range(1, 32));
    sweep->add_option("--p-gate", cfg.p_gates, "p_gate grid")->delimiter(',')->check(probability());
    sweep->add_option("--modes", cfg.modes, "Modes")->delimiter(',')->check(
        CLI::IsMember({"none", "serial", "parallel", "semi"}));
    sweep->add_option("--voting", cfg.votings, "Voters")->delimiter(',')->check(CLI::IsMember({"min3", "ideal"}));
    sweep->add_option("--trials", cfg.sweep_trials, "Trials per point")->check(CLI::PositiveNumber);
    sweep->add_option("--batch-rows", cfg.batch_rows, "Trials per crossbar batch")->check(CLI::PositiveNumber);

    auto* nn = app.add_subcommand("nn", "Network failure probability from p_mult");
    nn->add_option("--p-mult", cfg.p_mults, "p_mult values")->delimiter(',')->check(probability());
    nn->add_option("--from-csv", cfg.from_csv, "Experiment CSV whose p_hat column holds p_mult")
        ->check(CLI::ExistingFile);
    nn->add_option("--p-mask", cfg.p_mask, "Probability a multiplication error changes the output")
        ->check(probability());
    nn->add_option("--M", cfg.mults, "Multiplications per sample")->check(CLI::PositiveNumber);

    auto* degr = app.add_subcommand("degradation", "Expected corrupted weights after T batches");
    degr->add_option("--p-input", cfg.p_inputs, "p_input grid")->delimiter(',')->check(probability());
    degr->add_option("--T", cfg.batches, "Batch counts")->delimiter(',')->check(CLI::PositiveNumber);
    degr->add_option("--ecc", cfg.ecc_schemes, "Schemes")->delimiter(',')->check(
        CLI::IsMember({"none", "diagonal", "baseline", "ecc"}));
    degr->add_option("--W", cfg.weights, "Weight count")->check(CLI::PositiveNumber);
    degr->add_option("--bits", cfg.bits_per_weight, "Bits per weight")->check(CLI::Range(1, 64));
    degr->add_option("--m", cfg.m, "ECC block side")->check(CLI::Range(2, 4096));

    auto* netlist = app.add_subcommand("dump-netlist", "Print a micro-program as a netlist");
    netlist->add_option("--bits", cfg.bits, "Multiplier width")->check(CLI::Range(1, 32));
    netlist->add_option("--program", cfg.program, "mult or full-adder");

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitConfig;
    }

    try {
        CLI::App* leaf = app.get_subcommands().front();
        if (!leaf->get_subcommands().empty()) leaf = leaf->get_subcommands().front();
        const auto meta = header(leaf == verify || leaf == inject || leaf == overhead ? "ecc " + leaf->get_name()
                                                                                      : leaf->get_name(),
                                 cfg.seed, config_hash(app, *leaf));

        if (gates->parsed()) return cmd_gates(cfg, meta);
        if (mult->parsed()) return cmd_mult(cfg, meta);
        if (verify->parsed()) return cmd_ecc_verify(cfg, meta, false);
        if (inject->parsed()) return cmd_ecc_verify(cfg, meta, true);
        if (overhead->parsed()) return cmd_ecc_overhead(cfg, meta);
        if (sweep->parsed()) return cmd_tmr_sweep(cfg, meta);
        if (nn->parsed()) return cmd_nn(cfg, meta);
        if (degr->parsed()) return cmd_degradation(cfg, meta);
        if (netlist->parsed()) return cmd_dump_netlist(cfg);
    } catch (const std::exception& e) {
        std::cerr << "mpim: " << e.what() << "\n";
        return kExitConfig;
    }
    return kExitConfig;
}
