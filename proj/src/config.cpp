#include <fstream>
#include <set>
#include <sstream>

#include "admmprune/config.hpp"

namespace admmprune {

namespace {

std::string trim(const std::string& s) {
    size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_key(const std::string& key, const std::string& why) {
    throw std::runtime_error("config: key '" + key + "': " + why);
}

class KeyReader {
  public:
    explicit KeyReader(const std::map<std::string, std::string>& kv) : kv_(kv) {}

    bool has(const std::string& key) const {
        seen_.insert(key);
        return kv_.count(key) > 0;
    }

    std::string str(const std::string& key) const {
        seen_.insert(key);
        auto it = kv_.find(key);
        if (it == kv_.end()) throw std::runtime_error("config: missing key '" + key + "'");
        return it->second;
    }

    std::string str_or(const std::string& key, const std::string& dflt) const {
        seen_.insert(key);
        auto it = kv_.find(key);
        return it == kv_.end() ? dflt : it->second;
    }

    /// Typos would otherwise be ignored silently, which is worse than an error.
    void reject_unread() const {
        for (const auto& [key, value] : kv_)
            if (seen_.count(key) == 0) bad_key(key, "unknown key");
    }

    int64_t integer(const std::string& key, int64_t dflt) const {
        if (!has(key)) return dflt;
        try {
            size_t pos = 0;
            int64_t v = std::stoll(str(key), &pos);
            if (pos != str(key).size()) bad_key(key, "not an integer");
            return v;
        } catch (const std::invalid_argument&) {
            bad_key(key, "not an integer");
        } catch (const std::out_of_range&) {
            bad_key(key, "integer out of range");
        }
    }

    double real(const std::string& key, double dflt) const {
        if (!has(key)) return dflt;
        try {
            size_t pos = 0;
            double v = std::stod(str(key), &pos);
            if (pos != str(key).size()) bad_key(key, "not a number");
            return v;
        } catch (const std::invalid_argument&) {
            bad_key(key, "not a number");
        } catch (const std::out_of_range&) {
            bad_key(key, "number out of range");
        }
    }

  private:
    const std::map<std::string, std::string>& kv_;
    mutable std::set<std::string> seen_;
};

}  // namespace

std::map<std::string, std::string> parse_config_text(const std::string& text) {
    std::map<std::string, std::string> kv;
    std::istringstream is(text);
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("config: line " + std::to_string(lineno) +
                                     ": expected key = value");
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (key.empty())
            throw std::runtime_error("config: line " + std::to_string(lineno) + ": empty key");
        if (kv.count(key))
            throw std::runtime_error("config: duplicate key '" + key + "'");
        kv[key] = value;
    }
    return kv;
}

RunConfig config_from_map(const std::map<std::string, std::string>& kv) {
    KeyReader r(kv);
    RunConfig cfg;

    cfg.arch = r.str("arch");

    {
        std::string in = r.str("input");  // MxHxW
        std::istringstream is(in);
        char x1 = 0, x2 = 0;
        if (!(is >> cfg.in_maps >> x1 >> cfg.in_h >> x2 >> cfg.in_w) || x1 != 'x' || x2 != 'x' ||
            cfg.in_maps < 1 || cfg.in_h < 1 || cfg.in_w < 1)
            bad_key("input", "want MxHxW, e.g. 1x16x16");
    }

    cfg.data.kind = r.str_or("data", "synth");
    if (cfg.data.kind == "synth") {
        cfg.data.count = static_cast<int>(r.integer("synth.count", cfg.data.count));
        cfg.data.classes = static_cast<int>(r.integer("synth.classes", cfg.data.classes));
        cfg.data.noise_sd = r.real("synth.noise_sd", cfg.data.noise_sd);
    } else if (cfg.data.kind == "idx") {
        cfg.data.images = r.str("idx.images");
        cfg.data.labels = r.str("idx.labels");
        cfg.data.test_images = r.str_or("idx.test_images", "");
        cfg.data.test_labels = r.str_or("idx.test_labels", "");
        if (cfg.data.test_images.empty() != cfg.data.test_labels.empty())
            bad_key("idx.test_images", "give both test files or neither");
    } else if (cfg.data.kind == "csv") {
        cfg.data.path = r.str("csv.path");
        cfg.data.test_path = r.str_or("csv.test_path", "");
    } else {
        bad_key("data", "want synth, idx, or csv");
    }
    cfg.data.data_seed = static_cast<uint64_t>(r.integer("data_seed", 42));
    cfg.data.train_count = static_cast<int>(r.integer("train_count", 0));

    cfg.seed = static_cast<uint64_t>(r.integer("seed", 1));
    cfg.baseline_epochs = static_cast<int>(r.integer("baseline_epochs", 3));
    if (cfg.baseline_epochs < 1) bad_key("baseline_epochs", "must be >= 1");

    if (r.has("mus")) {
        std::istringstream is(r.str("mus"));
        double v;
        while (is >> v) cfg.schedule.mus.push_back(v);
        if (!is.eof()) bad_key("mus", "want space-separated numbers");
    }
    cfg.schedule.delta = static_cast<int>(r.integer("delta", cfg.schedule.delta));
    cfg.schedule.nu = static_cast<int>(r.integer("nu", cfg.schedule.nu));
    cfg.schedule.xi = static_cast<int>(r.integer("xi", cfg.schedule.xi));
    cfg.schedule.epsilon = r.real("epsilon", cfg.schedule.epsilon);
    cfg.schedule.lr = r.real("lr", cfg.schedule.lr);
    cfg.schedule.batch_size = static_cast<int>(r.integer("batch_size", cfg.schedule.batch_size));
    validate_schedule(cfg.schedule);

    cfg.penalty = parse_penalty(r.str_or("penalty", "l1"));

    cfg.options.rho = r.real("rho", 1.0);
    if (!(cfg.options.rho > 0.0)) bad_key("rho", "must be positive");
    cfg.options.momentum = r.real("momentum", 0.0);
    if (cfg.options.momentum < 0.0 || cfg.options.momentum >= 1.0)
        bad_key("momentum", "want [0, 1)");

    std::string guard = r.str_or("guard", "on");
    if (guard == "on")
        cfg.options.guard.enabled = true;
    else if (guard == "off")
        cfg.options.guard.enabled = false;
    else
        bad_key("guard", "want on or off");
    cfg.options.guard.trigger_fraction = r.real("guard_fraction", 0.5);
    if (cfg.options.guard.trigger_fraction <= 0.0 || cfg.options.guard.trigger_fraction > 1.0)
        bad_key("guard_fraction", "want (0, 1]");

    if (r.has("include_layers")) {
        std::vector<int> inc;
        std::istringstream is(r.str("include_layers"));
        int v;
        while (is >> v) inc.push_back(v);
        if (!is.eof()) bad_key("include_layers", "want space-separated layer indices");
        cfg.options.include = std::move(inc);
    }

    cfg.options.seed = cfg.seed;
    cfg.options.eval_batch = static_cast<int>(r.integer("eval_batch", 256));
    if (cfg.options.eval_batch < 1) bad_key("eval_batch", "must be >= 1");

    std::string backend = r.str_or("backend", "parallel");
    if (backend == "serial")
        cfg.options.backend = Backend::serial;
    else if (backend == "parallel")
        cfg.options.backend = Backend::parallel;
    else
        bad_key("backend", "want serial or parallel");

    cfg.options.out_dir = r.str_or("out", "");
    r.reject_unread();
    return cfg;
}

RunConfig load_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("config: cannot open " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return config_from_map(parse_config_text(ss.str()));
}

std::pair<Dataset, Dataset> load_datasets(const RunConfig& cfg) {
    const DataConfig& d = cfg.data;
    if (d.kind == "synth") {
        Dataset all =
            synth_generate(d.data_seed, d.count, cfg.in_h, cfg.in_w, d.classes, d.noise_sd);
        int train = d.train_count > 0 ? d.train_count : d.count * 4 / 5;
        return split_dataset(all, train, d.data_seed);
    }
    if (d.kind == "idx") {
        Dataset train = load_idx(d.images, d.labels);
        if (!d.test_images.empty()) {
            Dataset test = load_idx(d.test_images, d.test_labels);
            train.split = "train";
            test.split = "test";
            return {std::move(train), std::move(test)};
        }
        int n = d.train_count > 0 ? d.train_count : train.count() * 4 / 5;
        return split_dataset(train, n, d.data_seed);
    }
    // csv
    Dataset train = load_csv(d.path, cfg.in_maps, cfg.in_h, cfg.in_w);
    if (!d.test_path.empty()) {
        Dataset test = load_csv(d.test_path, cfg.in_maps, cfg.in_h, cfg.in_w);
        train.split = "train";
        test.split = "test";
        return {std::move(train), std::move(test)};
    }
    int n = d.train_count > 0 ? d.train_count : train.count() * 4 / 5;
    return split_dataset(train, n, d.data_seed);
}

std::string data_descriptor(const RunConfig& cfg) {
    const DataConfig& d = cfg.data;
    std::ostringstream os;
    if (d.kind == "synth") {
        os << "synth count=" << d.count << " classes=" << d.classes << " noise=" << d.noise_sd
           << " seed=" << d.data_seed;
    } else if (d.kind == "idx") {
        os << "idx " << d.images << " " << d.labels;
        if (!d.test_images.empty()) os << " test " << d.test_images << " " << d.test_labels;
    } else {
        os << "csv " << d.path;
        if (!d.test_path.empty()) os << " test " << d.test_path;
    }
    os << " input=" << cfg.in_maps << "x" << cfg.in_h << "x" << cfg.in_w;
    return os.str();
}

}  // namespace admmprune
