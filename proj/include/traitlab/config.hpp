#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "traitlab/model.hpp"
#include "traitlab/population.hpp"
#include "traitlab/simulate.hpp"

namespace traitlab {

// Structured-text experiment configuration (JSON object with sections grid,
// rates, kernel, initial, run and optional hj, compare, sweep, outputs).
// Parsing normalizes defaults so configs round-trip losslessly and the
// canonical dump hashes identically across platforms.
class ExperimentConfig {
public:
    static ExperimentConfig parse_file(const std::string& path);
    static ExperimentConfig parse(const std::string& text);
    static ExperimentConfig from_json(nlohmann::json doc);

    const nlohmann::json& doc() const { return doc_; }
    std::string canonical() const;
    std::uint64_t hash() const;

    double log_k() const;
    TraitGrid grid(double log_k_override = 0.0) const;
    Model model(double log_k_override = 0.0) const;

    bool has_u0() const;
    std::function<double(double)> u0() const;
    std::vector<double> u0_samples(const TraitGrid& g) const;
    // Initial mean field: exp(ln K * u0(x)) when given as an exponent, or the
    // direct mean specification.
    std::vector<double> initial_mean(const TraitGrid& g) const;
    InitialMode initial_mode() const;

    // run section
    std::vector<double> observation_times() const;
    double t_end() const;
    std::uint64_t replicates() const;
    std::uint64_t base_seed() const;
    BoundaryPolicy boundary() const;
    std::int64_t max_population() const;
    unsigned workers() const;  // 0 in config means "from env or 1"
    std::string declared_regime() const;  // "auto" | "subcritical" | "supercritical"
    double a_exponent() const;
    bool with_moments() const;

    std::string output_dir() const;

private:
    nlohmann::json doc_;
};

std::uint64_t fnv1a64(const std::string& s);

}  // namespace traitlab
