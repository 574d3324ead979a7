#include "l2lab/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <system_error>

namespace l2lab {

namespace pt = boost::property_tree;

std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

namespace {

template <typename T>
T parse_number(const std::string& text, const std::string& key) {
    T value{};
    const char* first = text.data();
    const char* last = text.data() + text.size();
    const auto res = std::from_chars(first, last, value);
    if (res.ec != std::errc{} || res.ptr != last) throw ConfigError("invalid value '" + text + "' for " + key);
    return value;
}

using Setter = std::function<void(ScenarioConfig&, const std::string&, const std::string&)>;

template <typename T>
Setter number_setter(T ScenarioConfig::*member) {
    return [member](ScenarioConfig& c, const std::string& v, const std::string& key) { c.*member = parse_number<T>(v, key); };
}

const std::map<std::string, std::map<std::string, Setter>>& setters() {
    static const std::map<std::string, std::map<std::string, Setter>> table{
        {"price",
         {
             {"mode",
              [](ScenarioConfig& c, const std::string& v, const std::string& key) {
                  if (v == "ar1") c.model.price.mode = PriceMode::ar1;
                  else if (v == "iid") c.model.price.mode = PriceMode::iid;
                  else throw ConfigError("invalid value '" + v + "' for " + key + " (expected ar1 or iid)");
              }},
             {"mu", [](ScenarioConfig& c, const std::string& v, const std::string& k) { c.model.price.mu = parse_number<double>(v, k); }},
             {"theta", [](ScenarioConfig& c, const std::string& v, const std::string& k) { c.model.price.theta = parse_number<double>(v, k); }},
             {"sigma", [](ScenarioConfig& c, const std::string& v, const std::string& k) { c.model.price.sigma = parse_number<double>(v, k); }},
             {"iid_std", [](ScenarioConfig& c, const std::string& v, const std::string& k) { c.model.price.iid_std = parse_number<double>(v, k); }},
         }},
        {"demand",
         {
             {"lambda0", [](ScenarioConfig& c, const std::string& v, const std::string& k) { c.model.demand.lambda0 = parse_number<double>(v, k); }},
             {"k", [](ScenarioConfig& c, const std::string& v, const std::string& k) { c.model.demand.k = parse_number<double>(v, k); }},
         }},
        {"cost",
         {
             {"a", [](ScenarioConfig& c, const std::string& v, const std::string& k) { c.model.cost.a = parse_number<double>(v, k); }},
             {"b0", [](ScenarioConfig& c, const std::string& v, const std::string& k) { c.model.cost.b0 = parse_number<double>(v, k); }},
             {"b1", [](ScenarioConfig& c, const std::string& v, const std::string& k) { c.model.cost.b1 = parse_number<double>(v, k); }},
             {"gamma", [](ScenarioConfig& c, const std::string& v, const std::string& k) { c.model.cost.gamma = parse_number<double>(v, k); }},
         }},
        {"mdp",
         {
             {"q_max", [](ScenarioConfig& c, const std::string& v, const std::string& k) { c.mdp.q_max = parse_number<int>(v, k); }},
             {"n_price", [](ScenarioConfig& c, const std::string& v, const std::string& k) { c.mdp.n_price = parse_number<int>(v, k); }},
             {"grid_width_sds", [](ScenarioConfig& c, const std::string& v, const std::string& k) { c.mdp.grid_width_sds = parse_number<double>(v, k); }},
             {"tol", [](ScenarioConfig& c, const std::string& v, const std::string& k) { c.mdp.tol = parse_number<double>(v, k); }},
             {"max_iters", [](ScenarioConfig& c, const std::string& v, const std::string& k) { c.mdp.max_iters = parse_number<int>(v, k); }},
         }},
        {"controller",
         {
             {"step_kind",
              [](ScenarioConfig& c, const std::string& v, const std::string& key) {
                  if (v == "constant") c.step_kind = StepKind::constant;
                  else if (v == "decreasing") c.step_kind = StepKind::decreasing;
                  else throw ConfigError("invalid value '" + v + "' for " + key + " (expected constant or decreasing)");
              }},
             {"step_f", number_setter(&ScenarioConfig::step_f)},
             {"step_p", number_setter(&ScenarioConfig::step_p)},
             {"step_f_const", number_setter(&ScenarioConfig::step_f_const)},
             {"step_p_const", number_setter(&ScenarioConfig::step_p_const)},
             {"kappa", number_setter(&ScenarioConfig::kappa)},
             {"lambda_bar", number_setter(&ScenarioConfig::lambda_bar)},
         }},
        {"sim",
         {
             {"horizon_updates", number_setter(&ScenarioConfig::horizon_updates)},
             {"seed", number_setter(&ScenarioConfig::seed)},
             {"replicas", number_setter(&ScenarioConfig::replicas)},
         }},
    };
    return table;
}

}  // namespace

ScenarioConfig parse_config(std::istream& in, const std::string& source) {
    pt::ptree tree;
    try {
        pt::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError(source + ": " + e.message() + " (line " + std::to_string(e.line()) + ")");
    }
    ScenarioConfig config;
    const auto& table = setters();
    for (const auto& [section, body] : tree) {
        const auto sec = table.find(section);
        if (sec == table.end()) throw ConfigError(source + ": unknown section [" + section + "]");
        if (body.empty() && !body.data().empty()) {
            throw ConfigError(source + ": key '" + section + "' outside any section");
        }
        for (const auto& [key, node] : body) {
            const auto it = sec->second.find(key);
            if (it == sec->second.end()) throw ConfigError(source + ": unknown key '" + key + "' in [" + section + "]");
            try {
                it->second(config, node.get_value<std::string>(), section + "." + key);
            } catch (const ConfigError& e) {
                throw ConfigError(source + ": " + e.what());
            }
        }
    }
    config.model.price.floor = config.model.price.mu / 100.0;
    try {
        config.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(source + ": " + e.what());
    }
    return config;
}

ScenarioConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    return parse_config(in, path);
}

std::string render_config(const ScenarioConfig& c) {
    std::ostringstream os;
    os << "[price]\n"
       << "mode = " << (c.model.price.mode == PriceMode::ar1 ? "ar1" : "iid") << "\n"
       << "mu = " << format_double(c.model.price.mu) << "\n"
       << "theta = " << format_double(c.model.price.theta) << "\n"
       << "sigma = " << format_double(c.model.price.sigma) << "\n"
       << "iid_std = " << format_double(c.model.price.iid_std) << "\n\n"
       << "[demand]\n"
       << "lambda0 = " << format_double(c.model.demand.lambda0) << "\n"
       << "k = " << format_double(c.model.demand.k) << "\n\n"
       << "[cost]\n"
       << "a = " << format_double(c.model.cost.a) << "\n"
       << "b0 = " << format_double(c.model.cost.b0) << "\n"
       << "b1 = " << format_double(c.model.cost.b1) << "\n"
       << "gamma = " << format_double(c.model.cost.gamma) << "\n\n"
       << "[mdp]\n"
       << "q_max = " << c.mdp.q_max << "\n"
       << "n_price = " << c.mdp.n_price << "\n"
       << "grid_width_sds = " << format_double(c.mdp.grid_width_sds) << "\n"
       << "tol = " << format_double(c.mdp.tol) << "\n"
       << "max_iters = " << c.mdp.max_iters << "\n\n"
       << "[controller]\n"
       << "step_kind = " << (c.step_kind == StepKind::constant ? "constant" : "decreasing") << "\n"
       << "step_f = " << format_double(c.step_f) << "\n"
       << "step_p = " << format_double(c.step_p) << "\n"
       << "step_f_const = " << format_double(c.step_f_const) << "\n"
       << "step_p_const = " << format_double(c.step_p_const) << "\n"
       << "kappa = " << c.kappa << "\n"
       << "lambda_bar = " << format_double(c.lambda_bar) << "\n\n"
       << "[sim]\n"
       << "horizon_updates = " << c.horizon_updates << "\n"
       << "seed = " << c.seed << "\n"
       << "replicas = " << c.replicas << "\n";
    return os.str();
}

void write_config(const std::string& path, const ScenarioConfig& config) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write config file '" + path + "'");
    out << render_config(config);
    if (!out) throw ConfigError("failed writing config file '" + path + "'");
}

}  // namespace l2lab
