#include "cpolab/config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace cpolab {

namespace {

std::string trim(const std::string& s) {
    const std::size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const std::size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

double to_double(const std::string& s, const std::string& what) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        fail(ErrorKind::config, "cannot parse '" + s + "' as a number for " + what);
    }
}

long long to_int(const std::string& s, const std::string& what) {
    try {
        std::size_t pos = 0;
        const long long v = std::stoll(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        fail(ErrorKind::config, "cannot parse '" + s + "' as an integer for " + what);
    }
}

}  // namespace

IniFile IniFile::parse_string(const std::string& text, const std::string& origin) {
    IniFile ini;
    std::istringstream in(text);
    std::string line;
    std::string current;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#' || t[0] == ';') continue;
        if (t.front() == '[') {
            if (t.back() != ']')
                fail(ErrorKind::config, origin + ":" + std::to_string(line_no) +
                                            ": malformed section header '" + t + "'");
            current = trim(t.substr(1, t.size() - 2));
            if (current.empty())
                fail(ErrorKind::config, origin + ":" + std::to_string(line_no) + ": empty section name");
            ini.section(current);
            continue;
        }
        const std::size_t eq = t.find('=');
        if (eq == std::string::npos)
            fail(ErrorKind::config, origin + ":" + std::to_string(line_no) +
                                        ": expected 'key = value', got '" + t + "'");
        if (current.empty())
            fail(ErrorKind::config, origin + ":" + std::to_string(line_no) +
                                        ": key outside of any [section]");
        const std::string key = trim(t.substr(0, eq));
        const std::string value = trim(t.substr(eq + 1));
        if (key.empty())
            fail(ErrorKind::config, origin + ":" + std::to_string(line_no) + ": empty key");
        auto& entries = ini.section(current).entries;
        for (const auto& kv : entries)
            if (kv.first == key)
                fail(ErrorKind::config, origin + ":" + std::to_string(line_no) + ": duplicate key '" +
                                            key + "' in [" + current + "]");
        entries.emplace_back(key, value);
    }
    return ini;
}

IniFile IniFile::parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::io, "cannot open config '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_string(buf.str(), path);
}

IniFile::Section& IniFile::section(const std::string& name) {
    for (auto& s : sections)
        if (s.name == name) return s;
    sections.push_back({name, {}});
    return sections.back();
}

const IniFile::Section* IniFile::find(const std::string& name) const {
    for (const auto& s : sections)
        if (s.name == name) return &s;
    return nullptr;
}

void IniFile::set(const std::string& section_name, const std::string& key,
                  const std::string& value) {
    auto& entries = section(section_name).entries;
    for (auto& kv : entries) {
        if (kv.first == key) {
            kv.second = value;
            return;
        }
    }
    entries.emplace_back(key, value);
}

std::string IniFile::to_string() const {
    std::ostringstream out;
    for (const auto& s : sections) {
        out << '[' << s.name << "]\n";
        for (const auto& kv : s.entries) out << kv.first << " = " << kv.second << '\n';
        out << '\n';
    }
    return out.str();
}

void IniFile::write(const std::string& path) const {
    std::ofstream out(path);
    if (!out) fail(ErrorKind::io, "cannot write config '" + path + "'");
    out << to_string();
    if (!out) fail(ErrorKind::io, "write to '" + path + "' failed");
}

std::optional<std::string> ConfigReader::get(const std::string& section, const std::string& key) {
    const IniFile::Section* s = data_.find(section);
    if (!s) return std::nullopt;
    for (const auto& kv : s->entries) {
        if (kv.first == key) {
            consumed_.insert({section, key});
            if (kv.second.empty()) return std::nullopt;
            return kv.second;
        }
    }
    return std::nullopt;
}

std::string ConfigReader::require(const std::string& section, const std::string& key) {
    auto v = get(section, key);
    if (!v) fail(ErrorKind::config, "missing required key '" + key + "' in [" + section + "]");
    return *v;
}

std::string ConfigReader::get_or(const std::string& section, const std::string& key,
                                 std::string fallback) {
    auto v = get(section, key);
    return v ? *v : fallback;
}

double ConfigReader::get_double(const std::string& section, const std::string& key,
                                double fallback) {
    auto v = get(section, key);
    return v ? to_double(*v, "[" + section + "]." + key) : fallback;
}

int ConfigReader::get_int(const std::string& section, const std::string& key, int fallback) {
    auto v = get(section, key);
    return v ? static_cast<int>(to_int(*v, "[" + section + "]." + key)) : fallback;
}

std::uint64_t ConfigReader::get_u64(const std::string& section, const std::string& key,
                                    std::uint64_t fallback) {
    auto v = get(section, key);
    if (!v) return fallback;
    try {
        return std::stoull(*v);
    } catch (const std::exception&) {
        fail(ErrorKind::config, "cannot parse '" + *v + "' as a seed for [" + section + "]." + key);
    }
}

bool ConfigReader::get_bool(const std::string& section, const std::string& key, bool fallback) {
    auto v = get(section, key);
    if (!v) return fallback;
    if (*v == "true" || *v == "1" || *v == "yes") return true;
    if (*v == "false" || *v == "0" || *v == "no") return false;
    fail(ErrorKind::config, "cannot parse '" + *v + "' as a boolean for [" + section + "]." + key);
}

void ConfigReader::finish() const {
    for (const auto& s : data_.sections)
        for (const auto& kv : s.entries)
            if (!consumed_.count({s.name, kv.first}))
                fail(ErrorKind::config, "unknown key '" + kv.first + "' in [" + s.name + "]");
}

std::vector<int> parse_int_list(const std::string& text, const std::string& what) {
    std::vector<int> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const std::string t = trim(item);
        if (t.empty()) continue;
        out.push_back(static_cast<int>(to_int(t, what)));
    }
    return out;
}

std::vector<double> parse_double_list(const std::string& text, const std::string& what) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const std::string t = trim(item);
        if (t.empty()) continue;
        out.push_back(to_double(t, what));
    }
    return out;
}

// "0,1,2,3 | 4,5 | 6,7" -> {{0,1,2,3},{4,5},{6,7}}
std::vector<std::vector<int>> parse_group_spec(const std::string& text) {
    std::vector<std::vector<int>> groups;
    std::stringstream ss(text);
    std::string part;
    while (std::getline(ss, part, '|')) {
        auto members = parse_int_list(part, "concept_groups");
        if (!members.empty()) groups.push_back(std::move(members));
    }
    return groups;
}

RunConfig RunConfig::from_ini(IniFile ini) {
    ConfigReader r(std::move(ini));
    RunConfig cfg;

    cfg.synthetic.input_dim = r.get_int("synthetic", "input_dim", cfg.synthetic.input_dim);
    cfg.synthetic.num_concepts = r.get_int("synthetic", "num_concepts", cfg.synthetic.num_concepts);
    cfg.synthetic.num_classes = r.get_int("synthetic", "num_classes", cfg.synthetic.num_classes);
    cfg.synthetic.samples = r.get_int("synthetic", "samples", cfg.synthetic.samples);
    cfg.synthetic.concept_rule_seed =
        r.get_u64("synthetic", "rule_seed", cfg.synthetic.concept_rule_seed);
    cfg.synthetic.signal_dim = r.get_int("synthetic", "signal_dim", cfg.synthetic.signal_dim);
    cfg.synthetic.noise_std = r.get_double("synthetic", "noise_std", cfg.synthetic.noise_std);
    cfg.synthetic.label_noise_free =
        r.get_bool("synthetic", "label_noise_free", cfg.synthetic.label_noise_free);
    if (auto g = r.get("synthetic", "concept_groups"))
        cfg.synthetic.concept_groups = parse_group_spec(*g);
    else if (auto ng = r.get("synthetic", "num_groups"))
        cfg.synthetic.concept_groups =
            equal_groups(cfg.synthetic.num_concepts, static_cast<int>(to_int(*ng, "num_groups")));
    if (auto vg = r.get("synthetic", "visible_groups"))
        cfg.synthetic.visible_groups = parse_int_list(*vg, "visible_groups");

    if (auto h = r.get("architecture", "encoder_hidden"))
        cfg.encoder_hidden = parse_int_list(*h, "encoder_hidden");

    cfg.dataset_path = r.get_or("data", "dataset", "");
    cfg.train_frac = r.get_double("data", "train_frac", cfg.train_frac);
    cfg.val_frac = r.get_double("data", "val_frac", cfg.val_frac);
    cfg.test_frac = r.get_double("data", "test_frac", cfg.test_frac);

    const std::string obj = r.get_or("objective", "kind", "bce");
    if (obj == "bce") cfg.train.objective = ObjectiveKind::bce;
    else if (obj == "cpo") cfg.train.objective = ObjectiveKind::cpo;
    else fail(ErrorKind::config, "objective kind must be 'bce' or 'cpo', got '" + obj + "'");
    cfg.train.lambda = static_cast<float>(r.get_double("objective", "lambda", 5.0));

    cfg.train.cpo.beta = static_cast<float>(r.get_double("cpo", "beta", 1.0));
    cfg.train.cpo.gumbel_temperature = static_cast<float>(r.get_double("cpo", "temperature", 1.0));
    cfg.train.cpo.samples_per_image = r.get_int("cpo", "samples_per_image", 1);
    const std::string prior = r.get_or("cpo", "prior", "uniform");
    if (prior == "uniform") cfg.train.cpo.prior = PriorKind::uniform;
    else if (prior == "checkpoint") cfg.train.cpo.prior = PriorKind::checkpoint;
    else fail(ErrorKind::config, "cpo prior must be 'uniform' or 'checkpoint', got '" + prior + "'");

    const std::string nk = r.get_or("noise", "kind", "none");
    if (nk == "none") cfg.noise.kind = NoiseSpec::Kind::none;
    else if (nk == "uniform") cfg.noise.kind = NoiseSpec::Kind::uniform;
    else if (nk == "confidence") cfg.noise.kind = NoiseSpec::Kind::confidence;
    else if (nk == "group") cfg.noise.kind = NoiseSpec::Kind::group;
    else fail(ErrorKind::config, "noise kind must be none|uniform|confidence|group, got '" + nk + "'");
    cfg.noise.p = r.get_double("noise", "p", 0.0);

    cfg.train.lr = static_cast<float>(r.get_double("train", "lr", 0.1));
    cfg.train.momentum = static_cast<float>(r.get_double("train", "momentum", 0.9));
    cfg.train.batch_size = r.get_int("train", "batch_size", 128);
    cfg.train.max_epochs = r.get_int("train", "max_epochs", 150);
    cfg.train.patience = r.get_int("train", "patience", 15);
    cfg.train.grad_trace_every = r.get_int("train", "grad_trace_every", 0);
    if (auto rf = r.get("train", "randint_fraction")) {
        cfg.train.randint_fraction = static_cast<float>(to_double(*rf, "randint_fraction"));
        cfg.randint_given = true;
    }
    const std::string mode = r.get_or("train", "mode", "joint");
    if (mode == "joint") cfg.train.mode = TrainMode::joint;
    else if (mode == "sequential") cfg.train.mode = TrainMode::sequential;
    else fail(ErrorKind::config, "train mode must be 'joint' or 'sequential', got '" + mode + "'");

    cfg.seed = r.get_u64("run", "seed", 1);
    cfg.out_dir = r.get_or("run", "out_dir", "");

    r.finish();

    if (!cfg.randint_given)
        cfg.train.randint_fraction = default_randint_fraction<float>(cfg.train.objective);
    cfg.train.seed = cfg.train_seed();
    cfg.synthetic.validate();
    cfg.train.validate();
    cfg.noise.validate();
    return cfg;
}

RunConfig RunConfig::from_file(const std::string& path) {
    return from_ini(IniFile::parse_file(path));
}

namespace {

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(12);
    os << v;
    return os.str();
}

std::string join_ints(const std::vector<int>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(v[i]);
    }
    return s;
}

std::string join_groups(const std::vector<std::vector<int>>& groups) {
    std::string s;
    for (std::size_t g = 0; g < groups.size(); ++g) {
        if (g) s += " | ";
        s += join_ints(groups[g]);
    }
    return s;
}

}  // namespace

IniFile RunConfig::resolved() const {
    IniFile ini;
    ini.set("synthetic", "input_dim", std::to_string(synthetic.input_dim));
    ini.set("synthetic", "num_concepts", std::to_string(synthetic.num_concepts));
    ini.set("synthetic", "num_classes", std::to_string(synthetic.num_classes));
    ini.set("synthetic", "samples", std::to_string(synthetic.samples));
    ini.set("synthetic", "rule_seed", std::to_string(synthetic.concept_rule_seed));
    ini.set("synthetic", "signal_dim", std::to_string(synthetic.signal_dim));
    ini.set("synthetic", "noise_std", fmt(synthetic.noise_std));
    ini.set("synthetic", "label_noise_free", synthetic.label_noise_free ? "true" : "false");
    ini.set("synthetic", "concept_groups", join_groups(architecture().concept_groups));
    if (!synthetic.visible_groups.empty())
        ini.set("synthetic", "visible_groups", join_ints(synthetic.visible_groups));

    ini.set("architecture", "encoder_hidden", join_ints(encoder_hidden));

    ini.set("data", "dataset", dataset_path);
    ini.set("data", "train_frac", fmt(train_frac));
    ini.set("data", "val_frac", fmt(val_frac));
    ini.set("data", "test_frac", fmt(test_frac));

    ini.set("objective", "kind", objective_name(train.objective));
    ini.set("objective", "lambda", fmt(train.lambda));

    ini.set("cpo", "beta", fmt(train.cpo.beta));
    ini.set("cpo", "temperature", fmt(train.cpo.gumbel_temperature));
    ini.set("cpo", "samples_per_image", std::to_string(train.cpo.samples_per_image));
    ini.set("cpo", "prior", train.cpo.prior == PriorKind::uniform ? "uniform" : "checkpoint");

    const char* nk = "none";
    if (noise.kind == NoiseSpec::Kind::uniform) nk = "uniform";
    else if (noise.kind == NoiseSpec::Kind::confidence) nk = "confidence";
    else if (noise.kind == NoiseSpec::Kind::group) nk = "group";
    ini.set("noise", "kind", nk);
    ini.set("noise", "p", fmt(noise.p));

    ini.set("train", "lr", fmt(train.lr));
    ini.set("train", "momentum", fmt(train.momentum));
    ini.set("train", "batch_size", std::to_string(train.batch_size));
    ini.set("train", "max_epochs", std::to_string(train.max_epochs));
    ini.set("train", "patience", std::to_string(train.patience));
    ini.set("train", "randint_fraction", fmt(train.randint_fraction));
    ini.set("train", "mode", train.mode == TrainMode::joint ? "joint" : "sequential");
    ini.set("train", "grad_trace_every", std::to_string(train.grad_trace_every));

    ini.set("run", "seed", std::to_string(seed));
    ini.set("run", "out_dir", out_dir);
    return ini;
}

}  // namespace cpolab
