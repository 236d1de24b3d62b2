#include "nleq/harness/config.hpp"

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "nleq/common.hpp"

namespace nleq::harness {

namespace {

std::string trim(const std::string& s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos)
        return "";
    return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

double to_double(const std::string& key, const std::string& raw)
{
    const auto v = trim(raw);
    if (v == "inf" || v == "+inf")
        return kInf;
    double out = 0.0;
    const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || p != v.data() + v.size() || v.empty())
        throw config_error("'" + key + "': expected a number, got '" + v + "'");
    return out;
}

template <class T>
T to_int(const std::string& key, const std::string& raw)
{
    const auto v = trim(raw);
    T out{};
    const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || p != v.data() + v.size() || v.empty())
        throw config_error("'" + key + "': expected an integer, got '" + v + "'");
    return out;
}

bool to_bool(const std::string& key, const std::string& raw)
{
    const auto v = trim(raw);
    if (v == "true" || v == "1")
        return true;
    if (v == "false" || v == "0")
        return false;
    throw config_error("'" + key + "': expected true or false, got '" + v + "'");
}

std::string resolve(const std::string& base, const std::string& path)
{
    if (path.empty() || std::filesystem::path(path).is_absolute())
        return path;
    return (std::filesystem::path(base) / path).lexically_normal().string();
}

}  // namespace

std::vector<double> parse_grid(const std::string& text)
{
    const auto t = trim(text);
    std::vector<double> out;
    if (t.find(':') != std::string::npos) {
        std::vector<std::string> parts;
        std::stringstream ss(t);
        for (std::string p; std::getline(ss, p, ':');)
            parts.push_back(p);
        if (parts.size() != 3)
            throw config_error("grid '" + t + "': expected start:step:stop");
        const double a = to_double("grid", parts[0]), s = to_double("grid", parts[1]), b = to_double("grid", parts[2]);
        if (!(s > 0.0) || !(b >= a) || !std::isfinite(b))
            throw config_error("grid '" + t + "': need step > 0 and stop >= start");
        const auto n = static_cast<long>(std::floor((b - a) / s + 1e-9));
        for (long i = 0; i <= n; ++i)
            out.push_back(std::round((a + static_cast<double>(i) * s) * 1e9) / 1e9);
        return out;
    }
    std::stringstream ss(t);
    for (std::string p; std::getline(ss, p, ',');)
        out.push_back(to_double("grid", p));
    if (out.empty())
        throw config_error("empty grid");
    return out;
}

void ExperimentConfig::validate() const
{
    channel.validate();
    auto increasing = [](const std::vector<double>& g, const char* what) {
        for (std::size_t i = 1; i < g.size(); ++i)
            if (!(g[i] > g[i - 1]))
                throw config_error(std::string(what) + " must be strictly increasing");
    };
    increasing(snr_grid, "waterfall.snr_grid");
    increasing(train_snr_grid, "sweep.train_snr_grid");
    if (frames_per_point < 1)
        throw config_error("waterfall.frames_per_point must be >= 1");
    if (batch < 1)
        throw config_error("waterfall.batch must be >= 1");
    if (!(target_ber > 0.0 && target_ber < 0.5))
        throw config_error("waterfall.target_ber must lie in (0, 0.5)");
    if (bp_iterations < 1)
        throw config_error("waterfall.bp_iterations must be >= 1");
    if (volterra_train.memory < 0)
        throw config_error("volterra.memory must be >= 0");
    if (volterra_train.n_blocks < 1 || volterra_train.block_symbols < 1)
        throw config_error("volterra training blocks must be positive");
    try {
        nn_dims.validate();
        nn_schedule.validate();
    } catch (const Error& e) {
        throw config_error(e.what());
    }
    if (!(calib_low < calib_target && calib_target < calib_high))
        throw config_error("calibrate: need band_low < target_ratio < band_high");
    if (!(calib_a_low > 0.0 && calib_a_low < calib_a_high))
        throw config_error("calibrate: need 0 < a_low < a_high");
    if (!(calib_tolerance > 0.0))
        throw config_error("calibrate.tolerance must be > 0");
}

ExperimentConfig parse_config(const std::string& text, const std::string& base_dir)
{
    namespace pt = boost::property_tree;
    pt::ptree tree;
    std::istringstream in(text);
    try {
        pt::ini_parser::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        throw config_error(std::string("config syntax: ") + e.what());
    }

    ExperimentConfig c;
    using Setter = std::function<void(const std::string&, const std::string&)>;
    const std::map<std::string, std::map<std::string, Setter>> schema{
        {"channel",
         {{"nl_amplitude", [&](auto& k, auto& v) { c.channel.nl_amplitude = to_double(k, v); }},
          {"rolloff", [&](auto& k, auto& v) { c.channel.rolloff = to_double(k, v); }},
          {"rrc_span_symbols", [&](auto& k, auto& v) { c.channel.rrc_span_symbols = to_int<int>(k, v); }},
          {"sps", [&](auto& k, auto& v) { c.channel.sps = to_int<int>(k, v); }},
          {"fir_len", [&](auto& k, auto& v) { c.channel.fir_len = to_int<int>(k, v); }},
          {"pilot_symbols", [&](auto& k, auto& v) { c.channel.pilot_symbols = to_int<int>(k, v); }},
          {"seed", [&](auto& k, auto& v) { c.channel.seed = to_int<std::uint64_t>(k, v); }}}},
        {"code", {{"path", [&](auto&, auto& v) { c.code_path = resolve(base_dir, trim(v)); }}}},
        {"equalizer",
         {{"kind",
           [&](auto& k, auto& v) {
               const auto s = trim(v);
               if (s == "none")
                   c.equalizer = EqualizerKind::none;
               else if (s == "volterra")
                   c.equalizer = EqualizerKind::volterra;
               else if (s == "nn_bp")
                   c.equalizer = EqualizerKind::nn_bp;
               else
                   throw config_error("'" + k + "': expected none, volterra or nn_bp");
           }},
          {"variant",
           [&](auto& k, auto& v) {
               const auto s = trim(v);
               if (s != "a" && s != "c")
                   throw config_error("'" + k + "': expected a or c");
               c.variant = chansim::parse_variant(s);
           }},
          {"volterra_model", [&](auto&, auto& v) { c.volterra_model = resolve(base_dir, trim(v)); }},
          {"nn_weights", [&](auto&, auto& v) { c.nn_weights = resolve(base_dir, trim(v)); }}}},
        {"volterra",
         {{"memory", [&](auto& k, auto& v) { c.volterra_train.memory = to_int<int>(k, v); }},
          {"train_snr_db", [&](auto& k, auto& v) { c.volterra_train_snr_db = to_double(k, v); }},
          {"train_blocks", [&](auto& k, auto& v) { c.volterra_train.n_blocks = to_int<std::size_t>(k, v); }},
          {"block_symbols", [&](auto& k, auto& v) { c.volterra_train.block_symbols = to_int<std::size_t>(k, v); }}}},
        {"nn",
         {{"L", [&](auto& k, auto& v) { c.nn_dims.L = to_int<int>(k, v); }},
          {"nq", [&](auto& k, auto& v) { c.nn_dims.nq = to_int<int>(k, v); }},
          {"nr", [&](auto& k, auto& v) { c.nn_dims.nr = to_int<int>(k, v); }},
          {"n_stages", [&](auto& k, auto& v) { c.nn_schedule.n_stages = to_int<int>(k, v); }},
          {"n_bn", [&](auto& k, auto& v) { c.nn_schedule.n_bn = to_int<int>(k, v); }},
          {"n_res", [&](auto& k, auto& v) { c.nn_schedule.n_res = to_int<int>(k, v); }},
          {"lambda1", [&](auto& k, auto& v) { c.nn_schedule.lambda1 = to_double(k, v); }},
          {"lambda2", [&](auto& k, auto& v) { c.nn_schedule.lambda2 = to_double(k, v); }},
          {"feedback",
           [&](auto& k, auto& v) {
               const auto t = trim(v);
               if (t != "posterior" && t != "extrinsic")
                   throw config_error("[nn] " + k + ": expected posterior or extrinsic, got '" + t + "'");
               c.nn_schedule.feedback = t == "extrinsic" ? nnbp::Feedback::extrinsic : nnbp::Feedback::posterior;
           }},
          {"last_stage_horizon",
           [&](auto& k, auto& v) {
               const auto t = trim(v);
               if (t != "n_bn" && t != "n_res")
                   throw config_error("[nn] " + k + ": expected n_bn or n_res, got '" + t + "'");
               c.nn_train.full_horizon_last = t == "n_res";
           }},
          {"warm_start", [&](auto& k, auto& v) { c.nn_train.warm_start = to_bool(k, v); }},
          {"resample_frames", [&](auto& k, auto& v) { c.nn_train.resample = to_bool(k, v); }},
          {"train_snr_db",
           [&](auto& k, auto& v) {
               if (trim(v) == "auto") {
                   c.nn_train_snr_auto = true;
               } else {
                   c.nn_train_snr_auto = false;
                   c.nn_train_snr_db = to_double(k, v);
               }
           }},
          {"frames", [&](auto& k, auto& v) { c.nn_train.frames = to_int<std::size_t>(k, v); }},
          {"batch", [&](auto& k, auto& v) { c.nn_train.batch = to_int<std::size_t>(k, v); }},
          {"epochs", [&](auto& k, auto& v) { c.nn_train.epochs = to_int<int>(k, v); }},
          {"learning_rate", [&](auto& k, auto& v) { c.nn_train.learning_rate = to_double(k, v); }},
          {"learning_rate_final", [&](auto& k, auto& v) { c.nn_train.learning_rate_final = to_double(k, v); }}}},
        {"waterfall",
         {{"snr_grid", [&](auto&, auto& v) { c.snr_grid = parse_grid(v); }},
          {"frames_per_point", [&](auto& k, auto& v) { c.frames_per_point = to_int<std::uint64_t>(k, v); }},
          {"min_errors", [&](auto& k, auto& v) { c.min_errors = to_int<std::uint64_t>(k, v); }},
          {"batch", [&](auto& k, auto& v) { c.batch = to_int<std::uint64_t>(k, v); }},
          {"target_ber", [&](auto& k, auto& v) { c.target_ber = to_double(k, v); }},
          {"bp_iterations", [&](auto& k, auto& v) { c.bp_iterations = to_int<int>(k, v); }}}},
        {"sweep",
         {{"train_snr_grid", [&](auto&, auto& v) { c.train_snr_grid = parse_grid(v); }},
          {"nf_eval_snr_db", [&](auto& k, auto& v) { c.nf_eval_snr_db = to_double(k, v); }},
          {"nf_blocks", [&](auto& k, auto& v) { c.nf_blocks = to_int<std::size_t>(k, v); }},
          {"moment_blocks", [&](auto& k, auto& v) { c.moment_blocks = to_int<std::size_t>(k, v); }}}},
        {"calibrate",
         {{"target_ratio", [&](auto& k, auto& v) { c.calib_target = to_double(k, v); }},
          {"band_low", [&](auto& k, auto& v) { c.calib_low = to_double(k, v); }},
          {"band_high", [&](auto& k, auto& v) { c.calib_high = to_double(k, v); }},
          {"a_low", [&](auto& k, auto& v) { c.calib_a_low = to_double(k, v); }},
          {"a_high", [&](auto& k, auto& v) { c.calib_a_high = to_double(k, v); }},
          {"train_snr_db", [&](auto& k, auto& v) { c.calib_train_snr_db = to_double(k, v); }},
          {"tolerance", [&](auto& k, auto& v) { c.calib_tolerance = to_double(k, v); }}}},
        {"run",
         {{"seed", [&](auto& k, auto& v) { c.seed = to_int<std::uint64_t>(k, v); }},
          {"output_dir", [&](auto&, auto& v) { c.output_dir = resolve(base_dir, trim(v)); }}}},
    };

    for (const auto& [section, body] : tree) {
        if (body.empty() && !body.data().empty())
            throw config_error("key '" + section + "' outside of any section");
        const auto s = schema.find(section);
        if (s == schema.end())
            throw config_error("unknown section [" + section + "]");
        for (const auto& [key, value] : body) {
            const auto k = s->second.find(key);
            if (k == s->second.end())
                throw config_error("unknown key '" + key + "' in [" + section + "]");
            k->second(section + "." + key, value.data());
        }
    }
    c.nn_dims.M = 3;
    c.nn_dims.stride = 2;
    c.validate();
    return c;
}

ExperimentConfig load_config(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw config_error("cannot read config '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    const auto dir = std::filesystem::path(path).parent_path().string();
    return parse_config(ss.str(), dir.empty() ? "." : dir);
}

}  // namespace nleq::harness
