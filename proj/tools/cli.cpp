#include "cli.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include "heapsae/fit.hpp"
#include "heapsae/io.hpp"
#include "heapsae/simstudy.hpp"
#include "heapsae/tables.hpp"

#include <boost/version.hpp>
#include <openssl/evp.h>
#include <openssl/opensslv.h>

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <iomanip>
#include <sstream>

#ifndef HEAPSAE_VERSION
#define HEAPSAE_VERSION "0.0.0"
#endif

namespace heapsae::cli {

namespace {

using json = nlohmann::json;
namespace fs = std::filesystem;

/// Bad configuration file or option combination.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

std::string hex(const unsigned char* bytes, unsigned int n) {
    std::ostringstream os;
    for (unsigned int i = 0; i < n; ++i) {
        os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(bytes[i]);
    }
    return os.str();
}

std::string sha256_bytes(const std::string& bytes) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int n = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), md, &n, EVP_sha256(), nullptr) != 1) {
        throw std::runtime_error("SHA-256 failed");
    }
    return hex(md, n);
}

std::string now_utc() {
    const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::string path_in(const std::string& dir, const std::string& name) {
    return (fs::path(dir) / name).string();
}

// 1-based line and column of a byte offset.
std::string line_col(const std::string& text, std::size_t offset) {
    offset = std::min(offset, text.size());
    std::size_t line = 1;
    std::size_t col = 1;
    for (std::size_t i = 0; i < offset; ++i) {
        if (text[i] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
    }
    return std::to_string(line) + ":" + std::to_string(col);
}

struct Config {
    std::string path;
    std::string text;
    json value = json::object();

    bool has(const std::string& key) const { return value.contains(key); }

    // Location of a key in the text, for messages about its value.
    std::string where(const std::string& key) const {
        const std::size_t at = text.find('"' + key + '"');
        return path + ":" + (at == std::string::npos ? std::string("1:1") : line_col(text, at));
    }

    template <class T>
    void get(const std::string& key, T& target) const {
        if (!has(key)) {
            return;
        }
        try {
            target = value.at(key).get<T>();
        } catch (const json::exception&) {
            throw ConfigError(where(key) + ": '" + key + "' has the wrong type");
        }
    }

    void allow(std::initializer_list<const char*> keys) const {
        for (const auto& [k, v] : value.items()) {
            if (std::none_of(keys.begin(), keys.end(), [&](const char* a) { return k == a; })) {
                throw ConfigError(where(k) + ": unknown key '" + k + "'");
            }
        }
    }
};

Config load_config(const std::string& path) {
    Config c;
    c.path = path;
    c.text = read_text(path);
    try {
        c.value = json::parse(c.text);
    } catch (const json::parse_error& e) {
        std::string msg = e.what();
        const auto cut = msg.find("; ");
        if (cut != std::string::npos) {
            msg = msg.substr(cut + 2);
        }
        throw ConfigError(path + ":" + line_col(c.text, e.byte == 0 ? 0 : e.byte - 1) + ": " + msg);
    }
    if (!c.value.is_object()) {
        throw ConfigError(path + ":1:1: configuration must be a JSON object");
    }
    return c;
}

PopulationSpec population_from(const Config& c) {
    PopulationSpec s = PopulationSpec::standard();
    if (!c.has("population")) {
        return s;
    }
    Config sub{c.path, c.text, c.value.at("population")};
    if (!sub.value.is_object()) {
        throw ConfigError(c.where("population") + ": 'population' must be an object");
    }
    sub.allow({"sizes", "covariate_prob", "mix_intercept", "mix_slope", "b01", "b02", "slope", "domain_sd", "sd1",
               "sd2"});
    sub.get("sizes", s.sizes);
    sub.get("covariate_prob", s.covariate_prob);
    sub.get("mix_intercept", s.mix_intercept);
    sub.get("mix_slope", s.mix_slope);
    sub.get("b01", s.b01);
    sub.get("b02", s.b02);
    sub.get("slope", s.slope);
    sub.get("domain_sd", s.domain_sd);
    sub.get("sd1", s.sd1);
    sub.get("sd2", s.sd2);
    try {
        s.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(c.where("population") + ": " + e.what());
    }
    return s;
}

json population_json(const PopulationSpec& s) {
    return {{"sizes", s.sizes},     {"covariate_prob", s.covariate_prob},
            {"mix_intercept", s.mix_intercept}, {"mix_slope", s.mix_slope},
            {"b01", s.b01},         {"b02", s.b02},
            {"slope", s.slope},     {"domain_sd", s.domain_sd},
            {"sd1", s.sd1},         {"sd2", s.sd2}};
}

// Run manifest, written through a temporary file once the command is done.
class Manifest {
public:
    Manifest(std::string command, const std::vector<std::string>& args) {
        m_["command"] = std::move(command);
        m_["arguments"] = args;
        m_["version"] = std::string("heapsae ") + HEAPSAE_VERSION;
        m_["versions"] = {{"heapsae", HEAPSAE_VERSION},
                          {"boost", BOOST_LIB_VERSION},
                          {"cli11", CLI11_VERSION},
                          {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                                std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                                std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
                          {"openssl", OPENSSL_VERSION_TEXT}};
        m_["started"] = now_utc();
        m_["inputs"] = json::object();
        m_["outputs"] = json::object();
    }

    void input(const std::string& role, const std::string& path) {
        m_["inputs"][role] = {{"path", path}, {"sha256", sha256_file(path)}};
    }
    void settings(const json& s) {
        m_["settings"] = s;
        m_["config_sha256"] = sha256_bytes(s.dump());
    }
    void seed(std::uint64_t s) { m_["seed"] = s; }
    json& extra(const std::string& key) { return m_[key]; }

    void write(const std::string& dir, const std::vector<std::string>& outputs) {
        for (const auto& name : outputs) {
            m_["outputs"][name] = sha256_file(path_in(dir, name));
        }
        m_["finished"] = now_utc();
        write_text(path_in(dir, "manifest.json"), m_.dump(2) + "\n");
    }

private:
    json m_;
};

json read_manifest(const std::string& dir) {
    const std::string path = path_in(dir, "manifest.json");
    if (!fs::exists(path)) {
        throw DataError(dir + ": no manifest.json; not an output directory of this tool");
    }
    try {
        return json::parse(read_text(path));
    } catch (const json::exception& e) {
        throw DataError(path + ": unreadable manifest: " + e.what());
    }
}

// Refuses artifacts whose files changed since their manifest was written.
void verify_outputs(const std::string& dir, const json& manifest, const std::vector<std::string>& names) {
    for (const auto& name : names) {
        const auto& outs = manifest.at("outputs");
        if (!outs.contains(name)) {
            throw DataError(dir + ": manifest does not list " + name);
        }
        if (sha256_file(path_in(dir, name)) != outs.at(name).get<std::string>()) {
            throw DataError(path_in(dir, name) + " does not match its manifest digest; the artifact is stale");
        }
    }
}

// Refuses to combine a fit with data other than the data it was fitted to.
void verify_input(const json& manifest, const std::string& role, const std::string& path, const std::string& dir) {
    const auto& in = manifest.at("inputs");
    if (!in.contains(role)) {
        throw DataError(dir + ": manifest records no " + role + " input");
    }
    if (sha256_file(path) != in.at(role).at("sha256").get<std::string>()) {
        throw DataError(path + " differs from the " + role + " file the fit in " + dir +
                        " was produced from; refit before using these draws");
    }
}

Table estimates_table(const std::vector<DomainDraws>& draws, bool with_w, const std::vector<long long>& sizes,
                      const std::vector<int>& sampled) {
    Table t;
    t.columns = {"domain", "indicator", "point", "sd", "q05", "q95", "n_d", "N_d"};
    std::vector<Indicator> inds;
    if (with_w) {
        inds.push_back(Indicator::wbar);
    }
    inds.push_back(Indicator::zbar);
    inds.push_back(Indicator::hsbar);
    for (std::size_t d = 0; d < draws.size(); ++d) {
        for (Indicator ind : inds) {
            const auto& v = ind == Indicator::wbar ? draws[d].wbar : ind == Indicator::zbar ? draws[d].zbar
                                                                                           : draws[d].hsbar;
            const Summary s = summarize(v);
            t.rows.push_back({std::to_string(d + 1), to_string(ind), format_double(s.mean), format_double(s.sd),
                              format_double(s.q05), format_double(s.q95), std::to_string(sampled[d]),
                              std::to_string(sizes[d])});
        }
    }
    return t;
}

Table diagnostics_table(const std::string& part, const PosteriorDraws& draws, Table t = {}) {
    if (t.columns.empty()) {
        t.columns = {"part", "parameter", "mean", "sd", "q05", "q50", "q95", "rhat", "ess_bulk"};
    }
    for (const auto& p : summarize_parameters(draws)) {
        t.rows.push_back({part, p.name, format_double(p.mean), format_double(p.sd), format_double(p.q05),
                          format_double(p.q50), format_double(p.q95), format_double(p.rhat),
                          format_double(p.ess_bulk)});
    }
    return t;
}

struct McmcFlags {
    int chains = 4;
    int iters = 2000;
    int warmup = 1000;
    int workers = 1;
    std::uint64_t seed = 1;
};

void add_mcmc_flags(CLI::App* cmd, McmcFlags& f) {
    cmd->add_option("--chains", f.chains, "Chains")->check(CLI::PositiveNumber);
    cmd->add_option("--iters", f.iters, "Iterations per chain including warm-up")->check(CLI::PositiveNumber);
    cmd->add_option("--warmup", f.warmup, "Warm-up iterations per chain")->check(CLI::NonNegativeNumber);
}

ChainConfig chain_config(const McmcFlags& f, std::uint64_t stream) {
    ChainConfig c;
    c.chains = f.chains;
    c.iterations = f.iters;
    c.warmup = f.warmup;
    c.seed = f.seed;
    c.workers = f.workers;
    c.stream = stream;
    try {
        c.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    return c;
}

json chain_json(const ChainConfig& c) {
    return {{"chains", c.chains}, {"iterations", c.iterations}, {"warmup", c.warmup}, {"seed", c.seed},
            {"target_acceptance", c.target_acceptance}, {"max_depth", c.max_depth}};
}

std::vector<std::vector<double>> standardized_rows(const std::vector<UnitRecord>& records) {
    std::vector<std::vector<double>> rows;
    for (const auto& r : records) {
        rows.push_back(r.x);
    }
    return rows;
}

std::vector<UnitRecord> standardize(std::vector<UnitRecord> records, const Standardizer& s) {
    for (auto& r : records) {
        r.x = s.apply(r.x);
    }
    return records;
}

// ---------------------------------------------------------------- simulate

struct SimulateArgs {
    std::string config;
    std::uint64_t seed = 1;
    std::string out;
    int scenario = 0;
    int replication = 1;
    double fraction = 0.03;
};

int cmd_simulate(const SimulateArgs& a, const std::vector<std::string>& argv, const CLI::App& cmd,
                 std::ostream& out) {
    Config c;
    if (!a.config.empty()) {
        c = load_config(a.config);
        c.allow({"population", "seed", "scenario", "replication", "fraction"});
    }
    const PopulationSpec spec = population_from(c);
    std::uint64_t seed = a.seed;
    int scenario = a.scenario;
    int replication = a.replication;
    double fraction = a.fraction;
    if (!cmd.count("--seed")) {
        c.get("seed", seed);
    }
    if (!cmd.count("--scenario")) {
        c.get("scenario", scenario);
    }
    if (!cmd.count("--replication")) {
        c.get("replication", replication);
    }
    if (!cmd.count("--fraction")) {
        c.get("fraction", fraction);
    }
    if (scenario != 0 && (scenario < 1 || scenario > 4)) {
        throw ConfigError("scenario must be 1, 2, 3 or 4");
    }
    if (replication < 1) {
        throw ConfigError("replication must be at least 1");
    }
    if (!(fraction > 0.0 && fraction <= 1.0)) {
        throw ConfigError("fraction must lie in (0, 1]");
    }

    Manifest m("simulate", argv);
    if (!a.config.empty()) {
        m.input("config", a.config);
    }
    json settings{{"population", population_json(spec)}, {"seed", seed}};
    if (scenario) {
        settings["scenario"] = scenario;
        settings["replication"] = replication;
        settings["fraction"] = fraction;
    }
    m.settings(settings);
    m.seed(seed);

    const Population pop = generate_population(spec, seed);
    Table units;
    units.columns = {"unit", "domain", "x1", "z", "component"};
    for (int d = 0; d < spec.domains(); ++d) {
        for (std::size_t i = pop.start[d]; i < pop.start[d + 1]; ++i) {
            units.rows.push_back({std::to_string(i + 1), std::to_string(d + 1), format_double(pop.x[i]),
                                  format_double(pop.z[i]), std::to_string(pop.component[i])});
        }
    }
    fs::create_directories(a.out);
    write_table(path_in(a.out, "population.csv"), units);
    write_truths(path_in(a.out, "truths.csv"), {pop.true_zbar, pop.true_hsbar});
    std::vector<std::string> outputs{"population.csv", "truths.csv"};

    if (scenario) {
        const auto sample = draw_sample(pop, fraction, seed, static_cast<std::uint64_t>(replication - 1));
        std::vector<double> z;
        std::vector<UnitRecord> records;
        for (int d = 0; d < spec.domains(); ++d) {
            for (std::size_t i : sample[d]) {
                UnitRecord r;
                r.domain = d;
                r.x = {pop.x[i]};
                r.w = 1;
                records.push_back(r);
                z.push_back(pop.z[i]);
            }
        }
        const auto answers =
            apply_heaping(z, ScenarioConfig::standard(scenario), seed, static_cast<std::uint64_t>(replication - 1));
        for (std::size_t i = 0; i < records.size(); ++i) {
            records[i].answer = answers[i];
        }
        std::vector<int> fd;
        std::vector<std::vector<double>> fx;
        std::vector<long long> fc;
        for (int d = 0; d < spec.domains(); ++d) {
            std::array<long long, 2> count{};
            for (std::size_t i = pop.start[d]; i < pop.start[d + 1]; ++i) {
                ++count[pop.x[i] > 0.5 ? 1 : 0];
            }
            for (int v = 0; v < 2; ++v) {
                if (count[v] > 0) {
                    fd.push_back(d);
                    fx.push_back({static_cast<double>(v)});
                    fc.push_back(count[v]);
                }
            }
        }
        write_sample(path_in(a.out, "sample.csv"), {"x1"}, records);
        write_frame(path_in(a.out, "frame.csv"), {"x1"}, PopulationFrame::from_patterns(spec.domains(), fd, fx, fc));
        outputs.push_back("sample.csv");
        outputs.push_back("frame.csv");
        out << "sample of " << records.size() << " units under scenario " << scenario << ", replication "
            << replication << "\n";
    }
    m.write(a.out, outputs);
    out << "population of " << pop.z.size() << " units in " << spec.domains() << " domains written to " << a.out
        << "\n";
    return kExitOk;
}

// --------------------------------------------------------------------- fit

struct FitArgs {
    std::string data;
    std::string frame;
    std::string model = "LNM-C";
    std::string mode = "full";
    bool face_value_topcode = false;
    double max_rhat = 0.0;
    std::string out;
    McmcFlags mcmc;
};

int cmd_fit(const FitArgs& a, const std::vector<std::string>& argv, std::ostream& out, std::ostream& err) {
    ModelKind kind;
    HeapingMode mode;
    try {
        kind = model_kind_from_string(a.model);
        mode = heaping_mode_from_string(a.mode);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    const ModelSpec spec{kind, mode, !a.face_value_topcode};
    const ChainConfig intensity_cfg = chain_config(a.mcmc, 2);
    const ChainConfig participation_cfg = chain_config(a.mcmc, 1);

    Manifest m("fit", argv);
    m.input("data", a.data);
    const SampleFile sample = read_sample(a.data, mode);
    int domains = sample.max_domain() + 1;
    if (!a.frame.empty()) {
        m.input("frame", a.frame);
        const FrameFile frame = read_frame(a.frame);
        check_sample_against_frame(sample, frame, a.data, a.frame);
        domains = frame.frame.domains;
    }
    const Standardizer standardizer = Standardizer::fit(standardized_rows(sample.records));
    const std::vector<UnitRecord> records = standardize(sample.records, standardizer);
    std::vector<UnitRecord> participants;
    for (const auto& r : records) {
        if (*r.w == 1) {
            participants.push_back(r);
        }
    }
    if (participants.empty()) {
        throw DataError(a.data + ": no participants (w = 1) to fit the intensity part");
    }
    const IntensityData data = IntensityData::from_records(participants, domains);
    const PriorConfig prior = PriorConfig::from_answers(data.answers(mode));
    json settings{{"model", to_string(kind)},
                  {"mode", to_string(mode)},
                  {"censor_topcode", spec.censor_topcode},
                  {"mcmc", chain_json(intensity_cfg)},
                  {"covariates", sample.covariates},
                  {"domains", domains}};
    m.settings(settings);
    m.seed(a.mcmc.seed);

    fs::create_directories(a.out);
    std::vector<std::string> outputs;
    double worst = 0.0;
    const auto t0 = std::chrono::steady_clock::now();
    const IntensityFit fit = fit_intensity(data, spec, prior, intensity_cfg);
    const double intensity_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_draws_csv(path_in(a.out, "intensity_draws.csv"), fit.draws);
    outputs.push_back("intensity_draws.csv");
    Table diag = diagnostics_table("intensity", fit.draws);
    worst = max_rhat(fit.draws);
    out << to_string(kind) << " intensity fit: " << data.units() << " participants, max R-hat "
        << format_double(std::round(worst * 1000) / 1000) << ", " << std::fixed << std::setprecision(1)
        << intensity_seconds << " s\n"
        << std::defaultfloat;

    const bool with_participation = sample.any_nonparticipant();
    double participation_seconds = 0.0;
    if (with_participation) {
        const auto t1 = std::chrono::steady_clock::now();
        const ParticipationFit pfit =
            fit_participation(ParticipationData::from_records(records, domains), PriorConfig{}, participation_cfg);
        participation_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t1).count();
        write_draws_csv(path_in(a.out, "participation_draws.csv"), pfit.draws);
        outputs.push_back("participation_draws.csv");
        diag = diagnostics_table("participation", pfit.draws, std::move(diag));
        const double r = max_rhat(pfit.draws);
        worst = std::max(worst, r);
        out << "participation fit: " << records.size() << " units, max R-hat "
            << format_double(std::round(r * 1000) / 1000) << ", " << std::fixed << std::setprecision(1)
            << participation_seconds << " s\n"
            << std::defaultfloat;
    } else {
        out << "participation fit skipped: every sampled unit has w = 1\n";
    }
    write_table(path_in(a.out, "diagnostics.csv"), diag);
    outputs.push_back("diagnostics.csv");

    json fitj{{"model", to_string(kind)},
              {"mode", to_string(mode)},
              {"censor_topcode", spec.censor_topcode},
              {"covariates", sample.covariates},
              {"standardizer", {{"mean", standardizer.mean}, {"sd", standardizer.sd}}},
              {"domains", domains},
              {"participation", with_participation},
              {"prior", {{"mu_center", prior.mu_center}, {"mu_scale", prior.mu_scale}}},
              {"seconds", {{"intensity", intensity_seconds}, {"participation", participation_seconds}}}};
    write_text(path_in(a.out, "fit.json"), fitj.dump(2) + "\n");
    outputs.push_back("fit.json");
    m.write(a.out, outputs);

    if (worst >= 1.01) {
        err << "warning: max R-hat " << worst << " >= 1.01; inspect diagnostics.csv\n";
    }
    if (a.max_rhat > 0.0 && !(worst < a.max_rhat)) {
        err << "error: max R-hat " << worst << " exceeds the limit " << a.max_rhat << "\n";
        return kExitNumerical;
    }
    return kExitOk;
}

// Everything predict and ppc need from a fit directory.
struct LoadedFit {
    ModelSpec spec;
    std::vector<std::string> covariates;
    Standardizer standardizer;
    int domains = 0;
    std::vector<IntensityState> intensity;
    std::vector<ParticipationParams> participation;
};

LoadedFit load_fit(const std::string& dir, const std::string& data_path) {
    const json manifest = read_manifest(dir);
    if (manifest.value("command", "") != "fit") {
        throw DataError(dir + ": not the output of the fit command");
    }
    const json fitj = json::parse(read_text(path_in(dir, "fit.json")));
    std::vector<std::string> files{"fit.json", "intensity_draws.csv"};
    const bool with_participation = fitj.at("participation").get<bool>();
    if (with_participation) {
        files.push_back("participation_draws.csv");
    }
    verify_outputs(dir, manifest, files);
    verify_input(manifest, "data", data_path, dir);

    LoadedFit f;
    f.spec = ModelSpec{model_kind_from_string(fitj.at("model")), heaping_mode_from_string(fitj.at("mode")),
                       fitj.at("censor_topcode").get<bool>()};
    f.covariates = fitj.at("covariates").get<std::vector<std::string>>();
    f.standardizer.mean = fitj.at("standardizer").at("mean").get<std::vector<double>>();
    f.standardizer.sd = fitj.at("standardizer").at("sd").get<std::vector<double>>();
    f.domains = fitj.at("domains").get<int>();
    f.intensity = intensity_states(read_draws_csv(path_in(dir, "intensity_draws.csv")), f.spec, f.covariates.size(),
                                   f.domains);
    if (with_participation) {
        f.participation = participation_states(read_draws_csv(path_in(dir, "participation_draws.csv")),
                                               f.covariates.size(), f.domains);
    }
    return f;
}

// ----------------------------------------------------------------- predict

struct PredictArgs {
    std::string fit;
    std::string data;
    std::string frame;
    std::string out;
    std::uint64_t seed = 1;
    int workers = 1;
};

int cmd_predict(const PredictArgs& a, const std::vector<std::string>& argv, std::ostream& out) {
    Manifest m("predict", argv);
    m.input("data", a.data);
    m.input("frame", a.frame);
    m.input("fit_manifest", path_in(a.fit, "manifest.json"));
    m.settings({{"seed", a.seed}});
    m.seed(a.seed);
    const LoadedFit fit = load_fit(a.fit, a.data);
    const SampleFile sample = read_sample(a.data, fit.spec.mode);
    const FrameFile frame = read_frame(a.frame);
    check_sample_against_frame(sample, frame, a.data, a.frame);
    if (sample.covariates != fit.covariates) {
        throw DataError(a.data + ": covariate columns differ from the fit");
    }
    if (frame.frame.domains != fit.domains) {
        throw DataError(a.frame + ": " + std::to_string(frame.frame.domains) + " domains, the fit has " +
                        std::to_string(fit.domains));
    }
    const PopulationFrame pframe = frame.frame.transformed(fit.standardizer);
    const std::vector<UnitRecord> records = standardize(sample.records, fit.standardizer);
    PredictionInput in;
    in.frame = &pframe;
    in.sample = records;
    in.intensity = fit.intensity;
    in.participation = fit.participation;
    in.seed = a.seed;
    in.workers = a.workers;
    const auto draws = hb_predict(in);

    std::vector<int> sampled(fit.domains, 0);
    for (const auto& r : sample.records) {
        ++sampled[r.domain];
    }
    fs::create_directories(a.out);
    write_table(path_in(a.out, "estimates.csv"),
                estimates_table(draws, !fit.participation.empty(), frame.frame.domain_sizes(), sampled));
    m.write(a.out, {"estimates.csv"});
    out << "estimates for " << fit.domains << " domains from " << fit.intensity.size() << " draws written to "
        << path_in(a.out, "estimates.csv") << "\n";
    return kExitOk;
}

// --------------------------------------------------------------------- ppc

struct PpcArgs {
    std::string fit;
    std::string data;
    std::string out;
    std::uint64_t seed = 1;
};

int cmd_ppc(const PpcArgs& a, const std::vector<std::string>& argv, std::ostream& out) {
    Manifest m("ppc", argv);
    m.input("data", a.data);
    m.input("fit_manifest", path_in(a.fit, "manifest.json"));
    m.settings({{"seed", a.seed}});
    m.seed(a.seed);
    const LoadedFit fit = load_fit(a.fit, a.data);
    const SampleFile sample = read_sample(a.data, fit.spec.mode);
    const std::vector<UnitRecord> records = standardize(sample.records, fit.standardizer);
    const PpcResult r = ppc_stats(records, fit.spec, fit.intensity, fit.participation, a.seed);

    Table t;
    t.columns = {"statistic", "value", "observed", "mean", "lo", "hi", "inside"};
    auto add = [&](const std::string& stat, int value, const PpcBand& b) {
        t.rows.push_back({stat, std::to_string(value), format_double(b.observed), format_double(b.mean),
                          format_double(b.lo), format_double(b.hi), b.inside() ? "1" : "0"});
    };
    int outside = 0;
    if (r.participation) {
        add("participation", 1, *r.participation);
        out << "participation: observed " << r.participation->observed << ", 90% band [" << r.participation->lo
            << ", " << r.participation->hi << "]" << (r.participation->inside() ? "" : " OUTSIDE") << "\n";
    }
    for (std::size_t i = 0; i < r.cdf.size(); ++i) {
        add("cdf", static_cast<int>(i) + 1, r.cdf[i]);
        outside += !r.cdf[i].inside();
    }
    for (std::size_t i = 0; i < r.counts.size(); ++i) {
        add("count", static_cast<int>(i) + 1, r.counts[i]);
        outside += !r.counts[i].inside();
    }
    fs::create_directories(a.out);
    write_table(path_in(a.out, "ppc.csv"), t);
    m.write(a.out, {"ppc.csv"});
    out << outside << " of " << r.cdf.size() + r.counts.size()
        << " report statistics fall outside their 90% predictive bands\n";
    return kExitOk;
}

// ------------------------------------------------------------------ direct

struct DirectArgs {
    std::string data;
    std::string frame;
    std::string out;
};

int cmd_direct(const DirectArgs& a, const std::vector<std::string>& argv, std::ostream& out) {
    Manifest m("direct", argv);
    m.input("data", a.data);
    m.input("frame", a.frame);
    m.settings(json::object());
    const SampleFile sample = read_sample(a.data);
    const FrameFile frame = read_frame(a.frame);
    check_sample_against_frame(sample, frame, a.data, a.frame);
    const auto sizes = frame.frame.domain_sizes();
    const auto est = direct_estimates(sample.records, sizes);
    Table t;
    t.columns = {"domain", "N_d", "n_d", "participants", "wbar", "wbar_se", "zbar", "zbar_se", "hsbar", "hsbar_se"};
    for (const auto& e : est) {
        t.rows.push_back({std::to_string(e.domain + 1), std::to_string(e.population), std::to_string(e.n),
                          std::to_string(e.participants), format_double(e.wbar), format_double(e.wbar_se),
                          format_double(e.zbar), format_double(e.zbar_se), format_double(e.hsbar),
                          format_double(e.hsbar_se)});
    }
    fs::create_directories(a.out);
    write_table(path_in(a.out, "direct.csv"), t);
    m.write(a.out, {"direct.csv"});
    out << "direct estimates for " << est.size() << " domains written to " << path_in(a.out, "direct.csv") << "\n";
    return kExitOk;
}

// --------------------------------------------------------------- sim-study

struct StudyArgs {
    std::string config;
    std::vector<int> scenarios;
    int replications = 25;
    std::vector<std::string> models;
    bool full_budget = false;
    std::string out;
    McmcFlags mcmc;
};

int cmd_sim_study(const StudyArgs& a, const std::vector<std::string>& argv, const CLI::App& cmd,
                  std::ostream& out, std::ostream& err) {
    Config c;
    if (!a.config.empty()) {
        c = load_config(a.config);
        c.allow({"population", "population_seed", "scenarios", "replications", "estimators", "chains", "iterations",
                 "warmup", "seed", "fraction", "rhat_threshold", "workers", "output_dir"});
    }
    StudyConfig s = StudyConfig::desk();
    s.population = population_from(c);
    if (a.full_budget) {
        s.replications = 500;
        s.settings.mcmc.iterations = 2000;
        s.settings.mcmc.warmup = 1000;
    }
    c.get("population_seed", s.population_seed);
    c.get("scenarios", s.scenarios);
    c.get("replications", s.replications);
    c.get("chains", s.settings.mcmc.chains);
    c.get("iterations", s.settings.mcmc.iterations);
    c.get("warmup", s.settings.mcmc.warmup);
    c.get("seed", s.settings.seed);
    c.get("fraction", s.settings.fraction);
    c.get("rhat_threshold", s.settings.rhat_threshold);
    c.get("workers", s.workers);
    std::vector<std::string> models;
    c.get("estimators", models);
    if (!a.scenarios.empty()) {
        s.scenarios = a.scenarios;
    }
    if (cmd.count("--replications")) {
        s.replications = a.replications;
    }
    if (!a.models.empty()) {
        models = a.models;
    }
    if (cmd.count("--chains")) {
        s.settings.mcmc.chains = a.mcmc.chains;
    }
    if (cmd.count("--iters")) {
        s.settings.mcmc.iterations = a.mcmc.iters;
    }
    if (cmd.count("--warmup")) {
        s.settings.mcmc.warmup = a.mcmc.warmup;
    }
    if (cmd.count("--seed")) {
        s.settings.seed = a.mcmc.seed;
    }
    if (!c.has("population_seed")) {
        s.population_seed = s.settings.seed;
    }
    if (cmd.count("--workers")) {
        s.workers = a.mcmc.workers;
    }
    if (!models.empty()) {
        s.settings.estimators.clear();
        for (const auto& name : models) {
            try {
                s.settings.estimators.push_back(model_kind_from_string(name));
            } catch (const std::invalid_argument& e) {
                throw ConfigError(e.what());
            }
        }
    }
    c.get("output_dir", s.output_dir);
    if (!a.out.empty()) {
        s.output_dir = a.out;
    }
    if (s.output_dir.empty()) {
        throw ConfigError("no output directory: pass --out or set output_dir in the configuration");
    }
    try {
        s.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }

    Manifest m("sim-study", argv);
    if (!a.config.empty()) {
        m.input("config", a.config);
    }
    std::vector<std::string> names;
    for (ModelKind k : s.settings.estimators) {
        names.push_back(to_string(k));
    }
    m.settings({{"population", population_json(s.population)},
                {"population_seed", s.population_seed},
                {"scenarios", s.scenarios},
                {"replications", s.replications},
                {"estimators", names},
                {"mcmc", chain_json(s.settings.mcmc)},
                {"seed", s.settings.seed},
                {"fraction", s.settings.fraction},
                {"rhat_threshold", s.settings.rhat_threshold}});
    m.seed(s.settings.seed);

    const auto t0 = std::chrono::steady_clock::now();
    const StudyResult r = run_study(s, [&](const ReplicationResult& rep) {
        const double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        err << "[" << std::fixed << std::setprecision(0) << sec << std::defaultfloat << " s] scenario "
            << rep.scenario << " replication " << rep.replication + 1;
        for (const auto& f : rep.fits) {
            err << " " << to_string(f.kind) << (f.converged ? "" : "(excluded)");
        }
        err << "\n";
    });
    json excl = json::array();
    for (const auto& row : r.summary) {
        if (row.indicator == Indicator::zbar) {
            excl.push_back({{"scenario", row.scenario}, {"estimator", row.estimator}, {"used", row.used},
                            {"excluded", row.excluded}});
        }
    }
    m.extra("exclusions") = excl;
    m.write(s.output_dir, {"estimates.csv", "fits.csv", "metrics.csv", "summary.csv", "table1.txt", "truths.csv"});
    out << format_summary_table(r.summary);
    return kExitOk;
}

// ------------------------------------------------------------------ report

struct ReportArgs {
    std::string study;
    std::string out;
};

int cmd_report(const ReportArgs& a, const std::vector<std::string>& argv, std::ostream& out) {
    const json manifest = read_manifest(a.study);
    if (manifest.value("command", "") != "sim-study") {
        throw DataError(a.study + ": not the output of the sim-study command");
    }
    verify_outputs(a.study, manifest, {"estimates.csv", "truths.csv"});
    Manifest m("report", argv);
    m.input("estimates", path_in(a.study, "estimates.csv"));
    m.input("truths", path_in(a.study, "truths.csv"));
    m.settings(manifest.at("settings"));
    const auto estimates = read_estimates(path_in(a.study, "estimates.csv"));
    const auto truths = read_truths(path_in(a.study, "truths.csv"));
    for (const auto& e : estimates) {
        if (e.domain >= static_cast<int>(truths[0].size())) {
            throw DataError(path_in(a.study, "estimates.csv") + ": domain " + std::to_string(e.domain + 1) +
                            " has no truth");
        }
    }
    const auto cells = compute_metrics(estimates, truths);
    const auto summary = average_metrics(cells, estimates);
    fs::create_directories(a.out);
    write_metric_tables(a.out, cells, summary, truths);
    m.write(a.out, {"metrics.csv", "summary.csv", "table1.txt"});
    out << format_summary_table(summary);
    return kExitOk;
}

}  // namespace

std::string sha256_file(const std::string& path) {
    return sha256_bytes(read_text(path));
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Bayesian small-area estimation for heaped and top-coded counts"};
    app.name("heapsae");
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string("heapsae ") + HEAPSAE_VERSION);

    SimulateArgs sim;
    auto* simulate = app.add_subcommand("simulate", "Generate a synthetic population and, optionally, one sample");
    simulate->add_option("--config", sim.config, "JSON configuration")->check(CLI::ExistingFile);
    simulate->add_option("--seed", sim.seed, "Seed");
    simulate->add_option("--scenario", sim.scenario, "Also draw a sample heaped under this scenario (1-4)")
        ->check(CLI::Range(1, 4));
    simulate->add_option("--replication", sim.replication, "Replication index of the sample")
        ->check(CLI::PositiveNumber);
    simulate->add_option("--fraction", sim.fraction, "Sampling fraction per domain");
    simulate->add_option("--out", sim.out, "Output directory")->required();

    FitArgs fit;
    auto* fitc = app.add_subcommand("fit", "Fit the participation and intensity parts");
    fitc->add_option("--data", fit.data, "Sample file")->required()->check(CLI::ExistingFile);
    fitc->add_option("--frame", fit.frame, "Population frame file")->check(CLI::ExistingFile);
    fitc->add_option("--model", fit.model, "LN, LN-C, LNM or LNM-C");
    fitc->add_option("--mode", fit.mode, "Heaping levels: full (1, 5, 10) or reduced (1, 5)");
    fitc->add_flag("--face-value-topcode", fit.face_value_topcode,
                   "LN/LNM: read 21 as the cell [20.5, 21.5) instead of censoring at 20.5");
    fitc->add_option("--max-rhat", fit.max_rhat, "Exit with status 3 when any R-hat reaches this value");
    fitc->add_option("--seed", fit.mcmc.seed, "Seed");
    fitc->add_option("--workers", fit.mcmc.workers, "Chains run concurrently")->check(CLI::PositiveNumber);
    add_mcmc_flags(fitc, fit.mcmc);
    fitc->add_option("--out", fit.out, "Output directory")->required();

    PredictArgs pred;
    auto* predict = app.add_subcommand("predict", "Domain estimates of wbar, zbar and HS from a fit");
    predict->add_option("--fit", pred.fit, "Fit output directory")->required()->check(CLI::ExistingDirectory);
    predict->add_option("--data", pred.data, "Sample file the fit used")->required()->check(CLI::ExistingFile);
    predict->add_option("--frame", pred.frame, "Population frame file")->required()->check(CLI::ExistingFile);
    predict->add_option("--seed", pred.seed, "Seed");
    predict->add_option("--workers", pred.workers, "Domains predicted concurrently")->check(CLI::PositiveNumber);
    predict->add_option("--out", pred.out, "Output directory")->required();

    PpcArgs ppc;
    auto* ppcc = app.add_subcommand("ppc", "Posterior predictive checks of a fit");
    ppcc->add_option("--fit", ppc.fit, "Fit output directory")->required()->check(CLI::ExistingDirectory);
    ppcc->add_option("--data", ppc.data, "Sample file the fit used")->required()->check(CLI::ExistingFile);
    ppcc->add_option("--seed", ppc.seed, "Seed");
    ppcc->add_option("--out", ppc.out, "Output directory")->required();

    DirectArgs dir;
    auto* direct = app.add_subcommand("direct", "Design-based direct estimates");
    direct->add_option("--data", dir.data, "Sample file")->required()->check(CLI::ExistingFile);
    direct->add_option("--frame", dir.frame, "Population frame file")->required()->check(CLI::ExistingFile);
    direct->add_option("--out", dir.out, "Output directory")->required();

    StudyArgs st;
    st.mcmc.iters = 1000;
    st.mcmc.warmup = 500;
    auto* study = app.add_subcommand("sim-study", "Run the design-based simulation study");
    study->add_option("--config", st.config, "JSON configuration")->check(CLI::ExistingFile);
    study->add_option("--scenario", st.scenarios, "Scenarios to run (repeatable)")->check(CLI::Range(1, 4));
    study->add_option("--replications", st.replications, "Replications per scenario")->check(CLI::PositiveNumber);
    study->add_option("--model", st.models, "Estimators to fit (repeatable)");
    study->add_flag("--full-budget", st.full_budget, "500 replications of 4 chains with 2000 iterations");
    study->add_option("--seed", st.mcmc.seed, "Seed");
    study->add_option("--workers", st.mcmc.workers, "Replications run concurrently")->check(CLI::PositiveNumber);
    add_mcmc_flags(study, st.mcmc);
    study->add_option("--out", st.out, "Output directory; finished replications are checkpointed here");

    ReportArgs rep;
    auto* report = app.add_subcommand("report", "Recompute the metric tables of a finished study");
    report->add_option("--study", rep.study, "sim-study output directory")->required()->check(CLI::ExistingDirectory);
    report->add_option("--out", rep.out, "Output directory")->required();

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitUsage;
    }

    std::vector<std::string> argv{"heapsae"};
    argv.insert(argv.end(), args.begin(), args.end());
    try {
        if (*simulate) {
            return cmd_simulate(sim, argv, *simulate, out);
        }
        if (*fitc) {
            return cmd_fit(fit, argv, out, err);
        }
        if (*predict) {
            return cmd_predict(pred, argv, out);
        }
        if (*ppcc) {
            return cmd_ppc(ppc, argv, out);
        }
        if (*direct) {
            return cmd_direct(dir, argv, out);
        }
        if (*study) {
            return cmd_sim_study(st, argv, *study, out, err);
        }
        if (*report) {
            return cmd_report(rep, argv, out);
        }
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const DataError& e) {
        err << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const NumericalError& e) {
        err << "numerical failure: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const json::exception& e) {
        err << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const std::invalid_argument& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitData;
    }
    return kExitUsage;
}

}  // namespace heapsae::cli
