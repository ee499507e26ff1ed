#ifndef CPOLAB_CONFIG_HPP
#define CPOLAB_CONFIG_HPP

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "cpolab/data.hpp"
#include "cpolab/model.hpp"
#include "cpolab/training.hpp"

namespace cpolab {

// Ordered key-value sections; order is preserved so resolved configs are
// written deterministically.
struct IniFile {
    struct Section {
        std::string name;
        std::vector<std::pair<std::string, std::string>> entries;
    };
    std::vector<Section> sections;

    static IniFile parse_file(const std::string& path);
    static IniFile parse_string(const std::string& text, const std::string& origin);

    Section& section(const std::string& name);
    const Section* find(const std::string& name) const;
    void set(const std::string& section, const std::string& key, const std::string& value);
    std::string to_string() const;
    void write(const std::string& path) const;
};

// Strict reader: every key must be consumed, unknown keys are an error.
class ConfigReader {
  public:
    explicit ConfigReader(IniFile data) : data_(std::move(data)) {}

    std::optional<std::string> get(const std::string& section, const std::string& key);
    std::string require(const std::string& section, const std::string& key);

    std::string get_or(const std::string& section, const std::string& key, std::string fallback);
    double get_double(const std::string& section, const std::string& key, double fallback);
    int get_int(const std::string& section, const std::string& key, int fallback);
    std::uint64_t get_u64(const std::string& section, const std::string& key,
                          std::uint64_t fallback);
    bool get_bool(const std::string& section, const std::string& key, bool fallback);

    // Fails if any key was never consumed.
    void finish() const;

  private:
    IniFile data_;
    std::set<std::pair<std::string, std::string>> consumed_;
};

std::vector<int> parse_int_list(const std::string& text, const std::string& what);
std::vector<double> parse_double_list(const std::string& text, const std::string& what);
std::vector<std::vector<int>> parse_group_spec(const std::string& text);

// A fully resolved run: dataset recipe (or path), architecture, objective,
// noise and training settings. Serializes back to the same format.
struct RunConfig {
    SyntheticSpec synthetic;
    std::vector<int> encoder_hidden = {64, 64};
    std::string dataset_path;  // empty means generate from the recipe
    double train_frac = 0.7, val_frac = 0.1, test_frac = 0.2;
    TrainConfig<float> train;
    bool randint_given = false;
    NoiseSpec noise;
    std::uint64_t seed = 1;
    std::string out_dir;

    static RunConfig from_file(const std::string& path);
    static RunConfig from_ini(IniFile ini);

    CbmArchitecture architecture() const {
        CbmArchitecture a;
        a.input_dim = synthetic.input_dim;
        a.encoder_hidden = encoder_hidden;
        a.num_concepts = synthetic.num_concepts;
        a.num_classes = synthetic.num_classes;
        a.concept_groups = synthetic.concept_groups.empty()
                               ? equal_groups(synthetic.num_concepts,
                                              std::min(4, synthetic.num_concepts))
                               : synthetic.concept_groups;
        return a;
    }

    // Derived seeds, mirrored by the sweep so cells and single runs agree.
    std::uint64_t split_seed() const { return seed + 1; }
    std::uint64_t noise_seed() const { return seed + 2; }
    std::uint64_t train_seed() const { return seed + 3; }

    IniFile resolved() const;
};

}  // namespace cpolab

#endif
