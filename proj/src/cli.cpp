#include "stdhl/cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "stdhl/checkpoint.hpp"
#include "stdhl/metrics.hpp"

namespace stdhl {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// RunConfig
// ---------------------------------------------------------------------------

nlohmann::json DataConfig::to_json() const {
    return {{"csv", csv},           {"power_curve", power_curve}, {"power_only", power_only},
            {"stride", stride},     {"splits", splits},           {"normalize", normalize}};
}

DataConfig DataConfig::from_json(const nlohmann::json& j) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        const std::string k = it.key();
        if (k != "csv" && k != "power_curve" && k != "power_only" && k != "stride" &&
            k != "splits" && k != "normalize")
            throw std::invalid_argument("data config: unknown key '" + k + "'");
    }
    DataConfig c;
    if (j.contains("csv")) c.csv = j["csv"].get<std::string>();
    if (j.contains("power_curve")) c.power_curve = j["power_curve"].get<std::string>();
    if (j.contains("power_only")) c.power_only = j["power_only"].get<bool>();
    if (j.contains("stride")) c.stride = j["stride"].get<std::int64_t>();
    if (j.contains("splits")) c.splits = j["splits"].get<std::vector<double>>();
    if (j.contains("normalize")) c.normalize = j["normalize"].get<std::string>();
    if (c.splits.size() != 3)
        throw std::invalid_argument("data config: splits must have 3 fractions");
    if (c.normalize != "per-farm-minmax" && c.normalize != "none")
        throw std::invalid_argument("data config: normalize must be 'per-farm-minmax' or 'none'");
    if (c.stride < 1) throw std::invalid_argument("data config: stride must be >= 1");
    return c;
}

nlohmann::json RunConfig::to_json() const {
    return {{"model", model.to_json()},
            {"train", train.to_json()},
            {"data", data.to_json()},
            {"output_dir", output_dir}};
}

RunConfig RunConfig::from_json(const nlohmann::json& j) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        const std::string k = it.key();
        if (k != "model" && k != "train" && k != "data" && k != "output_dir")
            throw std::invalid_argument("config: unknown key '" + k + "'");
    }
    RunConfig c;
    if (j.contains("model")) c.model = ModelConfig::from_json(j["model"]);
    if (j.contains("train")) c.train = TrainConfig::from_json(j["train"]);
    if (j.contains("data")) c.data = DataConfig::from_json(j["data"]);
    if (j.contains("output_dir")) c.output_dir = j["output_dir"].get<std::string>();
    return c;
}

RunConfig RunConfig::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open config " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument("config " + path + ": " + e.what());
    }
    RunConfig c = from_json(j);
    if (const char* env = std::getenv("STDHL_SEED")) {
        const auto seed = static_cast<std::uint64_t>(std::stoull(env));
        c.model.seed = seed;
        c.train.seed = seed;
    }
    return c;
}

void RunConfig::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write config " + path);
    out << to_json().dump(2) << '\n';
}

// ---------------------------------------------------------------------------
// shared pipeline pieces
// ---------------------------------------------------------------------------

namespace {

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path);
    out << content;
}

PowerCurve load_curve(const std::string& path) {
    return path.empty() ? PowerCurve::default_ge15() : PowerCurve::load(path);
}

struct Prepared {
    std::vector<FarmSeries> series;
    SplitSamples splits;
    FeatureScaler scaler;
    Tensor history;  // train-span power, N×T_hist
};

std::vector<FarmSeries> load_series(const std::string& path) {
    DataLoadResult r = load_csv(path);
    if (!r.row_errors.empty())
        std::cerr << "warning: " << r.row_errors.size() << " row(s) rejected while loading "
                  << path << "\n";
    if (r.gap_count > 0)
        std::cerr << "warning: " << r.gap_count << " timestamp gap(s) in " << path << "\n";
    if (r.series.empty()) throw DataError("no usable rows in " + path);
    return r.series;
}

void check_config_against_data(const ModelConfig& mc, const DataConfig& dc,
                               std::int64_t n_farms) {
    if (mc.n_nodes != n_farms)
        throw std::invalid_argument("config n_nodes=" + std::to_string(mc.n_nodes) +
                                    " but the data file has " + std::to_string(n_farms) +
                                    " farms");
    const auto want_f = dc.power_only ? 0 : kWindFeatureCount;
    if (mc.measured_features != want_f)
        throw std::invalid_argument("config measured_features=" +
                                    std::to_string(mc.measured_features) +
                                    " inconsistent with data.power_only (expected " +
                                    std::to_string(want_f) + ")");
    if (mc.nwp_features != kWindFeatureCount)
        throw std::invalid_argument("config nwp_features must be " +
                                    std::to_string(kWindFeatureCount));
}

// Windows, chronological split, train-only scaler fit, train history matrix.
Prepared prepare(const RunConfig& cfg, std::vector<FarmSeries> series, bool normalize) {
    Prepared p;
    p.series = std::move(series);
    check_config_against_data(cfg.model, cfg.data, static_cast<std::int64_t>(p.series.size()));
    WindowOptions wopt;
    wopt.look_back = cfg.model.look_back;
    wopt.horizon = cfg.model.horizon;
    wopt.extension = cfg.model.nwp_extension;
    wopt.stride = cfg.data.stride;
    wopt.power_only = cfg.data.power_only;
    WindowResult wr = make_windows(p.series, wopt);
    if (wr.samples.empty()) throw DataError("no complete windows in " + cfg.data.csv);
    p.splits = chronological_split(wr.samples, cfg.data.splits[0], cfg.data.splits[1],
                                   cfg.data.splits[2]);
    if (normalize && cfg.data.normalize == "per-farm-minmax" && !p.splits.train.empty()) {
        p.scaler = FeatureScaler::fit(p.splits.train, cfg.data.power_only);
    } else {
        p.scaler = FeatureScaler::identity(static_cast<std::int64_t>(p.series.size()));
    }
    p.scaler.apply_all(p.splits.train, cfg.data.power_only);
    p.scaler.apply_all(p.splits.val, cfg.data.power_only);
    p.scaler.apply_all(p.splits.test, cfg.data.power_only);
    const std::int64_t hist_end =
        p.splits.train.empty() ? p.series[0].size() : p.splits.train.back().origin_index + 1;
    p.history = history_matrix(p.series, hist_end);
    return p;
}

void write_report(const std::string& dir, const EvaluationReport& r) {
    fs::create_directories(dir);
    write_file(dir + "/report.json", r.to_json().dump(2) + "\n");
    write_file(dir + "/report.csv", EvaluationReport::csv_header() + "\n" + r.csv_row() + "\n");
    write_file(dir + "/per_horizon_mae.csv", r.per_horizon_csv());
}

const std::vector<WindowSample>& pick_split(const SplitSamples& s, const std::string& name,
                                            std::vector<WindowSample>& all_storage) {
    if (name == "train") return s.train;
    if (name == "val") return s.val;
    if (name == "test") return s.test;
    if (name == "all") {
        all_storage = s.train;
        all_storage.insert(all_storage.end(), s.val.begin(), s.val.end());
        all_storage.insert(all_storage.end(), s.test.begin(), s.test.end());
        return all_storage;
    }
    throw std::invalid_argument("unknown split '" + name + "' (train|val|test|all)");
}

bool is_baseline(const std::string& name) {
    return name == "persistence" || name == "mechanism";
}

// checkpoint path or baseline name -> model + scaler
LoadedModel resolve_model(const std::string& checkpoint, const std::string& config_path) {
    if (is_baseline(checkpoint)) {
        if (config_path.empty())
            throw std::invalid_argument("baseline '" + checkpoint + "' needs --config");
        RunConfig cfg = RunConfig::load(config_path);
        PowerCurve curve = load_curve(cfg.data.power_curve);
        LoadedModel lm;
        lm.model = make_forecaster(checkpoint, cfg.model, std::nullopt, &curve);
        lm.scaler = FeatureScaler::identity(cfg.model.n_nodes);
        return lm;
    }
    PowerCurve curve = PowerCurve::default_ge15();
    return load_checkpoint(checkpoint, &curve);
}

RunConfig config_for_model(const LoadedModel& lm, const std::string& config_path) {
    RunConfig cfg;
    if (!config_path.empty()) cfg = RunConfig::load(config_path);
    cfg.model = lm.model->config();
    cfg.data.power_only = cfg.model.measured_features == 0;
    // baselines read raw speeds; trained checkpoints carry their own scaler
    cfg.data.normalize = "per-farm-minmax";
    return cfg;
}

WindowSample window_at_origin(const std::vector<WindowSample>& samples,
                              const std::string& origin) {
    if (samples.empty()) throw DataError("no complete windows in the data file");
    if (origin.empty()) return samples.back();
    if (origin.find(' ') != std::string::npos) {
        const auto t = parse_timestamp(origin);
        for (const auto& s : samples)
            if (s.origin_time == t) return s;
        throw DataError("no window with origin " + origin);
    }
    const auto idx = std::stoll(origin);
    if (idx < 0 || idx >= static_cast<std::int64_t>(samples.size()))
        throw std::invalid_argument("origin index " + std::to_string(idx) + " out of range [0," +
                                    std::to_string(samples.size()) + ")");
    return samples[static_cast<std::size_t>(idx)];
}

double farm_mae(const Forecaster& model, const std::vector<WindowSample>& samples,
                std::int64_t farm) {
    double acc = 0.0;
    std::int64_t count = 0;
    for (const auto& s : samples) {
        Tensor med = model.forecast(s).median();
        for (std::int64_t t = 0; t < med.dim(1); ++t) {
            acc += std::abs(s.target(farm, t) - med(farm, t));
            ++count;
        }
    }
    return acc / static_cast<double>(count);
}

struct TrainOutcome {
    std::unique_ptr<Forecaster> model;
    FeatureScaler scaler;
    TrainHistory history;
    EvaluationReport test_report;
    std::vector<WindowSample> test_samples;
};

TrainOutcome run_training(const RunConfig& cfg, const std::string& model_name,
                          std::vector<FarmSeries> series) {
    PowerCurve curve = load_curve(cfg.data.power_curve);
    Prepared p = prepare(cfg, std::move(series), true);
    if (p.splits.train.empty() || p.splits.val.empty())
        throw DataError("train/validation partitions are empty; need more data");
    TrainOutcome out;
    out.model = make_forecaster(model_name, cfg.model, p.history, &curve);
    out.scaler = p.scaler;
    out.history = train(*out.model, p.splits.train, p.splits.val, cfg.train);
    out.test_samples = std::move(p.splits.test);
    if (!out.test_samples.empty()) out.test_report = evaluate(*out.model, out.test_samples);
    return out;
}

std::string csv_num(double v) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

// ---------------------------------------------------------------------------
// subcommand bodies
// ---------------------------------------------------------------------------

std::vector<std::int64_t> parse_int_list(const std::string& csv, bool allow_zero,
                                         const char* ctx);

int cmd_config_init(const std::string& out_path) {
    RunConfig{}.save(out_path);
    std::cout << "wrote " << out_path << "\n";
    return 0;
}

int cmd_synth(std::int64_t farms, std::int64_t length, std::uint64_t seed, double nwp_bias,
              std::int64_t nwp_lag, double noise, const std::string& lags_csv,
              const std::string& curve_path, const std::string& out_path) {
    SynthOptions opt;
    opt.n_farms = farms;
    opt.length = length;
    opt.seed = seed;
    opt.nwp_bias = nwp_bias;
    opt.nwp_lag = nwp_lag;
    opt.noise = noise;
    if (!lags_csv.empty()) opt.lags = parse_int_list(lags_csv, true, "synth --lags");
    const PowerCurve curve = load_curve(curve_path);
    save_csv(out_path, synth_dataset(opt, curve));
    std::cout << "wrote " << out_path << " (" << farms << " farms x " << length << " h, seed "
              << seed << ")\n";
    return 0;
}

int cmd_train(const std::string& config_path, const std::string& model_name,
              std::string out_dir) {
    RunConfig cfg = RunConfig::load(config_path);
    if (out_dir.empty()) out_dir = cfg.output_dir;
    fs::create_directories(out_dir);
    TrainOutcome out = run_training(cfg, model_name, load_series(cfg.data.csv));
    const std::string ckpt = out_dir + "/" + model_name + ".ckpt";
    save_checkpoint(ckpt, *out.model, out.scaler);
    write_file(out_dir + "/" + model_name + "_history.csv", out.history.to_csv());
    std::cout << model_name << ": best val pinball " << out.history.best_val << " at epoch "
              << out.history.best_epoch << "; checkpoint " << ckpt << "\n";
    if (out.test_report.n_samples > 0)
        std::cout << "test MAE " << out.test_report.mae << ", RMSE " << out.test_report.rmse
                  << "\n";
    return 0;
}

int cmd_evaluate(const std::string& checkpoint, const std::string& data_path,
                 const std::string& out_dir, const std::string& config_path,
                 const std::string& split) {
    LoadedModel lm = resolve_model(checkpoint, config_path);
    RunConfig cfg = config_for_model(lm, config_path);
    cfg.data.csv = data_path;
    Prepared p = prepare(cfg, load_series(data_path), false);
    lm.scaler.apply_all(p.splits.train, cfg.data.power_only);
    lm.scaler.apply_all(p.splits.val, cfg.data.power_only);
    lm.scaler.apply_all(p.splits.test, cfg.data.power_only);
    std::vector<WindowSample> all;
    const auto& samples = pick_split(p.splits, split, all);
    if (samples.empty()) throw DataError("split '" + split + "' is empty");
    EvaluationReport r = evaluate(*lm.model, samples);
    write_report(out_dir, r);
    std::cout << EvaluationReport::csv_header() << "\n" << r.csv_row() << "\n";
    return 0;
}

int cmd_forecast(const std::string& checkpoint, const std::string& data_path,
                 const std::string& origin, const std::string& out_path,
                 const std::string& config_path) {
    LoadedModel lm = resolve_model(checkpoint, config_path);
    RunConfig cfg = config_for_model(lm, config_path);
    cfg.data.csv = data_path;
    Prepared p = prepare(cfg, load_series(data_path), false);
    std::vector<WindowSample> all;
    auto samples = pick_split(p.splits, "all", all);
    WindowSample w = window_at_origin(samples, origin);
    lm.scaler.apply(w, cfg.data.power_only);
    ForecastQuantiles q = lm.model->forecast(w);
    std::ostringstream os;
    os << "time,farm,level,value\n";
    for (std::int64_t t = 0; t < q.horizon(); ++t)
        for (std::int64_t n = 0; n < q.n_nodes(); ++n)
            for (std::int64_t l = 0; l < q.n_levels(); ++l) {
                char buf[96];
                std::snprintf(buf, sizeof buf, "%s,%s,%.2f,%.6f\n",
                              format_timestamp(w.origin_time + (t + 1) * kMinutesPerHour).c_str(),
                              p.series[static_cast<std::size_t>(n)].farm_id.c_str(),
                              q.levels[static_cast<std::size_t>(l)], q.value(l, n, t));
                os << buf;
            }
    write_file(out_path, os.str());
    std::cout << "wrote " << out_path << "\n";
    return 0;
}

int cmd_transfer_matrix(const std::string& checkpoint, const std::string& data_path,
                        const std::string& origin, const std::string& out_path,
                        const std::string& config_path) {
    LoadedModel lm = resolve_model(checkpoint, config_path);
    RunConfig cfg = config_for_model(lm, config_path);
    cfg.data.csv = data_path;
    Prepared p = prepare(cfg, load_series(data_path), false);
    std::vector<WindowSample> all;
    auto samples = pick_split(p.splits, "all", all);
    WindowSample w = window_at_origin(samples, origin);
    lm.scaler.apply(w, cfg.data.power_only);
    Tensor m = lm.model->transfer_matrix(w);  // throws for kinds without one
    std::ostringstream os;
    os << "farm";
    for (const auto& s : p.series) os << ',' << s.farm_id;
    os << '\n';
    for (std::int64_t i = 0; i < m.dim(0); ++i) {
        os << p.series[static_cast<std::size_t>(i)].farm_id;
        for (std::int64_t j = 0; j < m.dim(1); ++j) {
            char buf[32];
            std::snprintf(buf, sizeof buf, ",%.9f", m(i, j));
            os << buf;
        }
        os << '\n';
    }
    write_file(out_path, os.str());
    std::cout << "wrote " << out_path << "\n";
    return 0;
}

std::vector<std::int64_t> parse_int_list(const std::string& csv, bool allow_zero,
                                         const char* ctx) {
    std::vector<std::int64_t> out;
    std::stringstream ss(csv);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (tok.empty()) continue;
        std::size_t pos = 0;
        long long v = 0;
        try {
            v = std::stoll(tok, &pos);
        } catch (const std::exception&) {
            pos = 0;
        }
        if (pos != tok.size() || v < (allow_zero ? 0 : 1))
            throw std::invalid_argument(std::string(ctx) + ": values must be positive integers" +
                                        (allow_zero ? " (0 allowed)" : "") + ", got '" + tok +
                                        "'");
        out.push_back(v);
    }
    if (out.empty()) throw std::invalid_argument(std::string(ctx) + ": empty value list");
    return out;
}

int cmd_ablate_horizon_sweep(const std::string& config_path, const std::string& model_name,
                             const std::string& values_csv, bool is_lookback,
                             const std::string& out_path) {
    const auto values = parse_int_list(values_csv, !is_lookback, "ablate");
    RunConfig base = RunConfig::load(config_path);
    auto series = load_series(base.data.csv);
    std::ostringstream os;
    os << (is_lookback ? "lookback" : "nwp_extension") << ",test_mae\n";
    for (auto v : values) {
        RunConfig cfg = base;
        if (is_lookback) cfg.model.look_back = v;
        else cfg.model.nwp_extension = v;
        TrainOutcome out = run_training(cfg, model_name, series);
        os << v << ',' << csv_num(out.test_report.mae) << '\n';
        std::cout << (is_lookback ? "lookback " : "nwp-ext ") << v << ": test MAE "
                  << out.test_report.mae << "\n";
    }
    write_file(out_path, os.str());
    std::cout << "wrote " << out_path << "\n";
    return 0;
}

// Incrementally grow the covariate farm set around the target farm and track
// the target's test MAE.
int cmd_ablate_spatial(const std::string& config_path, const std::string& model_name,
                       const std::string& target, const std::string& order_csv,
                       const std::string& out_path) {
    RunConfig base = RunConfig::load(config_path);
    auto series = load_series(base.data.csv);
    std::vector<std::string> order{target};
    {
        std::stringstream ss(order_csv);
        std::string tok;
        while (std::getline(ss, tok, ','))
            if (!tok.empty()) order.push_back(tok);
    }
    std::ostringstream os;
    os << "n_farms,farms,target_mae\n";
    for (std::size_t k = 1; k <= order.size(); ++k) {
        std::vector<std::string> subset(order.begin(), order.begin() + static_cast<long>(k));
        auto sub_series = select_farms(series, subset);
        RunConfig cfg = base;
        cfg.model.n_nodes = static_cast<std::int64_t>(subset.size());
        cfg.model.hyperedges = 0;  // re-derive ceil(N/2) per subset
        TrainOutcome out = run_training(cfg, model_name, sub_series);
        if (out.test_samples.empty()) throw DataError("ablate spatial: test split is empty");
        const double target_mae = farm_mae(*out.model, out.test_samples, 0);
        os << k << ',';
        for (std::size_t i = 0; i < subset.size(); ++i) os << (i ? "+" : "") << subset[i];
        os << ',' << csv_num(target_mae) << '\n';
        std::cout << k << " farm(s): target MAE " << target_mae << "\n";
    }
    write_file(out_path, os.str());
    std::cout << "wrote " << out_path << "\n";
    return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
    CLI::App app{"STDHL wind power forecasting toolkit"};
    app.require_subcommand(1);

    // config init
    auto* config = app.add_subcommand("config", "configuration files");
    std::string cfg_out = "config.json";
    auto* config_init = config->add_subcommand("init", "write a config with all defaults");
    config_init->add_option("--out", cfg_out, "output path")->required();

    // synth
    auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
    std::int64_t farms = 10, length = 8760, nwp_lag = 2;
    std::uint64_t synth_seed = 1;
    double nwp_bias = 0.3, noise = 0.03;
    std::string synth_out, synth_curve, synth_lags;
    synth->add_option("--farms", farms, "number of farms");
    synth->add_option("--length", length, "hours of data");
    synth->add_option("--seed", synth_seed, "generator seed");
    synth->add_option("--nwp-lag", nwp_lag, "pseudo-NWP timing error (h)");
    synth->add_option("--nwp-bias", nwp_bias, "pseudo-NWP speed bias (m/s)");
    synth->add_option("--noise", noise, "power measurement noise");
    synth->add_option("--lags", synth_lags, "per-farm propagation lags, comma list");
    synth->add_option("--curve", synth_curve, "power curve breakpoint file");
    synth->add_option("--out", synth_out, "output CSV")->required();

    // train
    auto* tr = app.add_subcommand("train", "train a model");
    std::string tr_config, tr_model, tr_out;
    tr->add_option("--config", tr_config, "run config JSON")->required();
    tr->add_option("--model", tr_model, "stdhl|stsgl|stdgl|stshl|linear")->required();
    tr->add_option("--out", tr_out, "output directory (default: config output_dir)");

    // evaluate
    auto* ev = app.add_subcommand("evaluate", "evaluate a checkpoint or baseline");
    std::string ev_ckpt, ev_data, ev_out, ev_config, ev_split = "all";
    ev->add_option("--checkpoint", ev_ckpt, "checkpoint path, or persistence|mechanism")
        ->required();
    ev->add_option("--data", ev_data, "data CSV")->required();
    ev->add_option("--out", ev_out, "output directory")->required();
    ev->add_option("--config", ev_config, "run config (required for baselines)");
    ev->add_option("--split", ev_split, "train|val|test|all (default all)");

    // forecast
    auto* fc = app.add_subcommand("forecast", "quantile fan for one origin");
    std::string fc_ckpt, fc_data, fc_origin, fc_out, fc_config;
    fc->add_option("--checkpoint", fc_ckpt, "checkpoint path, or persistence|mechanism")
        ->required();
    fc->add_option("--data", fc_data, "data CSV")->required();
    fc->add_option("--origin", fc_origin, "origin timestamp 'YYYYMMDD HH:MM' or window index");
    fc->add_option("--out", fc_out, "output CSV")->required();
    fc->add_option("--config", fc_config, "run config (required for baselines)");

    // transfer-matrix
    auto* tm = app.add_subcommand("transfer-matrix", "effective spatial operator for one window");
    std::string tm_ckpt, tm_data, tm_origin, tm_out, tm_config;
    tm->add_option("--checkpoint", tm_ckpt, "checkpoint path")->required();
    tm->add_option("--data", tm_data, "data CSV")->required();
    tm->add_option("--origin", tm_origin, "origin timestamp or window index");
    tm->add_option("--out", tm_out, "output CSV")->required();
    tm->add_option("--config", tm_config, "run config (for baselines)");

    // ablate
    auto* ab = app.add_subcommand("ablate", "retrain across a covariate sweep");
    ab->require_subcommand(1);
    std::string ab_config, ab_model = "stdhl", ab_values, ab_out, ab_target, ab_order;
    auto* ab_lb = ab->add_subcommand("lookback", "sweep the measured look-back horizon");
    ab_lb->add_option("--values", ab_values, "comma list, e.g. 3,6,12,24")->required();
    ab_lb->add_option("--config", ab_config, "run config")->required();
    ab_lb->add_option("--model", ab_model, "model name (default stdhl)");
    ab_lb->add_option("--out", ab_out, "output CSV")->required();
    auto* ab_ext = ab->add_subcommand("nwp-ext", "sweep the NWP extension");
    ab_ext->add_option("--values", ab_values, "comma list, e.g. 0,2,4,8")->required();
    ab_ext->add_option("--config", ab_config, "run config")->required();
    ab_ext->add_option("--model", ab_model, "model name (default stdhl)");
    ab_ext->add_option("--out", ab_out, "output CSV")->required();
    auto* ab_sp = ab->add_subcommand("spatial", "incrementally grow the farm set");
    ab_sp->add_option("--target", ab_target, "target farm id")->required();
    ab_sp->add_option("--order", ab_order, "comma list of farm ids to add")->required();
    ab_sp->add_option("--config", ab_config, "run config")->required();
    ab_sp->add_option("--model", ab_model, "model name (default stdhl)");
    ab_sp->add_option("--out", ab_out, "output CSV")->required();

    std::vector<const char*> argv;
    argv.push_back("stdhl");
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (config_init->parsed()) return cmd_config_init(cfg_out);
        if (synth->parsed())
            return cmd_synth(farms, length, synth_seed, nwp_bias, nwp_lag, noise, synth_lags,
                             synth_curve, synth_out);
        if (tr->parsed()) return cmd_train(tr_config, tr_model, tr_out);
        if (ev->parsed()) return cmd_evaluate(ev_ckpt, ev_data, ev_out, ev_config, ev_split);
        if (fc->parsed()) return cmd_forecast(fc_ckpt, fc_data, fc_origin, fc_out, fc_config);
        if (tm->parsed())
            return cmd_transfer_matrix(tm_ckpt, tm_data, tm_origin, tm_out, tm_config);
        if (ab_lb->parsed())
            return cmd_ablate_horizon_sweep(ab_config, ab_model, ab_values, true, ab_out);
        if (ab_ext->parsed())
            return cmd_ablate_horizon_sweep(ab_config, ab_model, ab_values, false, ab_out);
        if (ab_sp->parsed())
            return cmd_ablate_spatial(ab_config, ab_model, ab_target, ab_order, ab_out);
        std::cerr << "no subcommand given\n";
        return 1;
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 3;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace stdhl
