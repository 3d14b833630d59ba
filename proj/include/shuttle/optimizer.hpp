#pragma once

// Genetic search over per-period resistor indices.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "shuttle/error.hpp"
#include "shuttle/metrics.hpp"
#include "shuttle/parallel.hpp"
#include "shuttle/pipeline.hpp"
#include "shuttle/seeding.hpp"

namespace shuttle {

inline constexpr int n_alleles = 4;

inline void validate_genome(const Genome& g, std::size_t n_genes) {
    if (g.size() != n_genes)
        throw ConfigError("genome has " + std::to_string(g.size()) + " genes, expected " + std::to_string(n_genes));
    for (int a : g)
        if (a < 0 || a >= n_alleles)
            throw ConfigError("gene value " + std::to_string(a) + " outside {0,1,2,3}");
}

enum class SeedSchedule {
    /// Fresh common noise seeds every generation.
    per_generation,
    /// One common seed set for the whole run.
    per_run,
};

struct GAConfig {
    std::size_t generations = 50;
    std::size_t population = 12;
    std::size_t parents = 2;
    double mutation_prob = 0.3;
    std::size_t elitism = 1;
    std::size_t tournament_size = 3;
    double lambda_sigma = 1.0;
    /// Noise realisations per fitness evaluation; 0 = noise-free objective.
    std::size_t n_noise = 0;
    SeedSchedule seeds = SeedSchedule::per_generation;
    std::uint64_t seed = 0;
    /// Stop once the best objective reaches this value.
    double stop_threshold = std::numeric_limits<double>::infinity();
    std::size_t threads = 1;

    void validate() const {
        if (parents < 2 || population < parents)
            throw ConfigError("GA requires population >= parents >= 2");
        if (!(mutation_prob >= 0 && mutation_prob <= 1))
            throw ConfigError("mutation probability must lie in [0,1]");
        if (elitism >= population)
            throw ConfigError("elitism must be smaller than the population");
        if (tournament_size < 1)
            throw ConfigError("tournament size must be >= 1");
        if (!(lambda_sigma >= 0))
            throw ConfigError("lambda_sigma must be non-negative");
    }
};

struct FitnessReport {
    double J = 0.0;
    double mean_purity = 0.0;
    double sigma_purity = 0.0;
    /// Purity of the ensemble-averaged reduced spin state.
    double ensemble_purity = 0.0;
    std::vector<double> purities;
};

/// J = P_s for a single noise-free realisation, otherwise mean - lambda * sigma.
inline FitnessReport fitness_from_results(std::span<const RealizationResult> results, double lambda_sigma) {
    if (results.empty())
        throw DomainError("fitness needs at least one realisation");
    FitnessReport f;
    std::vector<Mat4> states;
    for (const auto& r : results) {
        f.purities.push_back(r.spin_purity);
        states.push_back(r.final_state);
    }
    f.mean_purity = std::accumulate(f.purities.begin(), f.purities.end(), 0.0) / static_cast<double>(f.purities.size());
    f.sigma_purity = population_std<double>(f.purities);
    f.ensemble_purity = ensemble_spin_purity(states);
    f.J = results.size() == 1 ? f.purities[0] : f.mean_purity - lambda_sigma * f.sigma_purity;
    return f;
}

/// Common noise seeds for one generation.
inline std::vector<std::uint64_t> generation_seeds(const GAConfig& cfg, std::size_t generation) {
    std::size_t n = std::max<std::size_t>(cfg.n_noise, 1);
    std::size_t g = cfg.seeds == SeedSchedule::per_run ? 0 : generation;
    std::vector<std::uint64_t> s(n);
    for (std::size_t k = 0; k < n; ++k)
        s[k] = derive_seed(cfg.seed, {0x6e6f697365ULL, g, k});
    return s;
}

/// Tags a failure with the genome that caused it.
class EvaluationError : public Error {
public:
    EvaluationError(const Genome& g, const std::exception& cause) : Error(describe(g) + ": " + cause.what()) {}

private:
    static std::string describe(const Genome& g) {
        std::string s = "genome [";
        for (std::size_t i = 0; i < g.size(); ++i)
            s += (i ? "," : "") + std::to_string(g[i]);
        return s + "]";
    }
};

/// Evaluate a genome over a fixed seed set (one noise-free run when n_noise = 0).
inline FitnessReport evaluate(const Genome& genome, const Scenario& sc, const ValleyMap& map,
                              std::span<const std::uint64_t> seeds, double lambda_sigma, std::size_t threads = 1) {
    validate_genome(genome, sc.n_periods());
    try {
        std::size_t n = sc.noisy() ? seeds.size() : 1;
        if (n == 0)
            throw ConfigError("noise-aware evaluation needs at least one seed");
        auto results = parallel_map(n, threads, [&](std::size_t k) {
            return run_realization(sc, map, genome, sc.noisy() ? seeds[k] : 0);
        });
        return fitness_from_results(results, lambda_sigma);
    } catch (const EvaluationError&) {
        throw;
    } catch (const std::exception& e) {
        throw EvaluationError(genome, e);
    }
}

struct GenerationRecord {
    std::size_t generation = 0;
    double best_J = 0.0;
    double mean_J = 0.0;
    double wall_time_s = 0.0;
    Genome best;
};

struct GAResult {
    Genome best;
    double best_J = 0.0;
    FitnessReport best_report;
    std::vector<GenerationRecord> history;
    std::size_t evaluations = 0;
    bool reached_threshold = false;
};

/// Fitness callback: (genomes, seed set) -> one report per genome.
using BatchFitness = std::function<std::vector<FitnessReport>(const std::vector<Genome>&, std::span<const std::uint64_t>)>;

/// Generational GA: tournament parent selection, uniform crossover between the
/// selected parents, per-gene mutation to a different allele, elitism.
inline GAResult run_ga(const GAConfig& cfg, std::size_t n_genes, const BatchFitness& fitness) {
    cfg.validate();
    if (n_genes == 0)
        throw ConfigError("GA needs at least one gene");
    std::mt19937_64 rng(derive_seed(cfg.seed, {0x6761ULL}));
    std::uniform_int_distribution<int> allele(0, n_alleles - 1);
    std::uniform_int_distribution<int> other(1, n_alleles - 1);
    std::bernoulli_distribution coin(0.5);
    std::bernoulli_distribution mutate(cfg.mutation_prob);

    std::vector<Genome> pop(cfg.population, Genome(n_genes));
    for (auto& g : pop)
        for (auto& a : g)
            a = allele(rng);

    GAResult res;
    std::map<Genome, FitnessReport> cache;
    std::vector<std::uint64_t> cached_seeds;
    const auto start = std::chrono::steady_clock::now();

    auto evaluate_population = [&](std::size_t generation) {
        auto seeds = generation_seeds(cfg, generation);
        if (seeds != cached_seeds) {
            cache.clear();
            cached_seeds = seeds;
        }
        std::vector<Genome> todo;
        for (const auto& g : pop)
            if (!cache.count(g) && std::find(todo.begin(), todo.end(), g) == todo.end())
                todo.push_back(g);
        auto reports = fitness(todo, seeds);
        res.evaluations += todo.size();
        for (std::size_t i = 0; i < todo.size(); ++i)
            cache.emplace(todo[i], std::move(reports[i]));
        std::vector<double> J(pop.size());
        for (std::size_t i = 0; i < pop.size(); ++i)
            J[i] = cache.at(pop[i]).J;
        return J;
    };

    auto record = [&](std::size_t generation, const std::vector<double>& J) {
        auto best = static_cast<std::size_t>(std::max_element(J.begin(), J.end()) - J.begin());
        GenerationRecord rec;
        rec.generation = generation;
        rec.best_J = J[best];
        rec.mean_J = std::accumulate(J.begin(), J.end(), 0.0) / static_cast<double>(J.size());
        rec.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        rec.best = pop[best];
        res.history.push_back(rec);
        res.best = pop[best];
        res.best_J = J[best];
        res.best_report = cache.at(pop[best]);
    };

    auto J = evaluate_population(0);
    record(0, J);

    for (std::size_t gen = 1; gen <= cfg.generations && res.best_J < cfg.stop_threshold; ++gen) {
        std::vector<std::size_t> order(pop.size());
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return J[a] > J[b]; });

        std::uniform_int_distribution<std::size_t> pick(0, pop.size() - 1);
        std::vector<Genome> parents;
        for (std::size_t p = 0; p < cfg.parents; ++p) {
            std::size_t best = pick(rng);
            for (std::size_t k = 1; k < cfg.tournament_size; ++k) {
                std::size_t c = pick(rng);
                if (J[c] > J[best])
                    best = c;
            }
            parents.push_back(pop[best]);
        }

        std::vector<Genome> next;
        for (std::size_t e = 0; e < cfg.elitism; ++e)
            next.push_back(pop[order[e]]);
        for (std::size_t k = 0; next.size() < cfg.population; ++k) {
            const auto& a = parents[k % parents.size()];
            const auto& b = parents[(k + 1) % parents.size()];
            Genome child(n_genes);
            for (std::size_t i = 0; i < n_genes; ++i)
                child[i] = coin(rng) ? a[i] : b[i];
            for (auto& gene : child)
                if (mutate(rng))
                    gene = (gene + other(rng)) % n_alleles;
            next.push_back(std::move(child));
        }
        pop = std::move(next);
        J = evaluate_population(gen);
        record(gen, J);
    }
    res.reached_threshold = res.best_J >= cfg.stop_threshold;
    return res;
}

/// GA over the full shuttling pipeline.
inline GAResult optimize_schedule(const GAConfig& cfg, const Scenario& sc, const ValleyMap& map) {
    GAConfig c = cfg;
    if (!sc.noisy())
        c.n_noise = 0;
    BatchFitness fitness = [&](const std::vector<Genome>& genomes, std::span<const std::uint64_t> seeds) {
        std::size_t per = sc.noisy() ? seeds.size() : 1;
        auto flat = parallel_map(genomes.size() * per, c.threads, [&](std::size_t idx) {
            const auto& g = genomes[idx / per];
            try {
                return run_realization(sc, map, g, sc.noisy() ? seeds[idx % per] : 0);
            } catch (const std::exception& e) {
                throw EvaluationError(g, e);
            }
        });
        std::vector<FitnessReport> out;
        for (std::size_t i = 0; i < genomes.size(); ++i)
            out.push_back(fitness_from_results(std::span(flat).subspan(i * per, per), c.lambda_sigma));
        return out;
    };
    return run_ga(c, sc.n_periods(), fitness);
}

} // namespace shuttle
