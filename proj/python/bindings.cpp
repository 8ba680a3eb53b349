#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "hashreward/env/demonstrations.hpp"
#include "hashreward/env/gridworld.hpp"
#include "hashreward/errors.hpp"
#include "hashreward/harness/experiment.hpp"
#include "hashreward/reward/reward_model.hpp"
#include "hashreward/theory/bounds.hpp"

namespace py = pybind11;
using namespace hashreward;

namespace {

env::GridworldSpec spec_from(const KeyValues& overrides) {
    return harness::config_from(overrides).env;
}

harness::ExperimentConfig experiment_config(const KeyValues& values) { return harness::config_from(values); }

}  // namespace

PYBIND11_MODULE(_hashreward, m) {
    m.doc() = "Hashed-discriminator adversarial imitation on a pixel gridworld";

    py::register_exception<ConfigurationError>(m, "ConfigurationError", PyExc_ValueError);
    py::register_exception<InputError>(m, "InputError", PyExc_ValueError);
    py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);
    py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);
    py::register_exception<FormatError>(m, "FormatError", PyExc_IOError);

    m.def("variants", [] {
        std::vector<std::string> names;
        for (auto v : reward::all_variants()) names.emplace_back(reward::to_string(v));
        return names;
    });
    m.def("variant_mask", [](const std::string& name) {
        const auto mask = reward::mask_for(reward::variant_from_string(name));
        static const char* heads[] = {"pixels", "logits", "binarized"};
        py::dict d;
        d["reconstruction"] = mask.use_reconstruction;
        d["binarization_reg"] = mask.use_binarization_reg;
        d["contrastive"] = mask.use_contrastive;
        d["update_autoencoder"] = mask.update_autoencoder_during_training;
        d["head_input"] = heads[static_cast<int>(mask.head_input)];
        return d;
    }, py::arg("variant"));

    m.def("render", [](std::size_t x, std::size_t y, const KeyValues& overrides) {
        const auto spec = spec_from(overrides);
        const auto state = env::render(spec, {static_cast<int>(x), static_cast<int>(y)});
        Eigen::MatrixXf image(state.height, state.width);
        for (int r = 0; r < state.height; ++r) {
            for (int c = 0; c < state.width; ++c) image(r, c) = state.intensities[static_cast<std::size_t>(r * state.width + c)];
        }
        return image;
    }, py::arg("x"), py::arg("y"), py::arg("env") = KeyValues{});

    m.def("expert_start_value", [](const KeyValues& overrides, double tolerance) {
        const auto spec = spec_from(overrides);
        const auto expert = env::value_iteration_expert(spec, tolerance);
        double v = 0.0;
        for (const auto& s : spec.start_distribution) v += s.probability * expert.value(spec, s.cell);
        return v;
    }, py::arg("env") = KeyValues{}, py::arg("tolerance") = 1e-10);

    m.def("collect_demos", [](const std::filesystem::path& out, const std::string& policy, std::size_t count,
                              std::uint64_t seed, const KeyValues& overrides) {
        const auto spec = spec_from(overrides);
        env::DemonstrationSet demos;
        if (policy == "expert") {
            const auto expert = env::value_iteration_expert(spec, 1e-10);
            demos = env::collect_demonstrations(spec, env::expert_policy(spec, expert), count, seed, env::DemoSource::expert);
        } else if (policy == "random") {
            demos = env::collect_demonstrations(spec, env::uniform_policy(), count, seed, env::DemoSource::random);
        } else {
            throw InputError("policy must be 'expert' or 'random'");
        }
        env::save_demonstrations(out, demos, spec);
        return demos.sample_count();
    }, py::arg("out"), py::arg("policy") = "expert", py::arg("count") = 20, py::arg("seed") = 0,
       py::arg("env") = KeyValues{});

    m.def("evaluate_expert", [](std::size_t episodes, std::uint64_t seed, const KeyValues& overrides) {
        const auto spec = spec_from(overrides);
        const auto expert = env::value_iteration_expert(spec, 1e-10);
        const auto e = harness::evaluate(env::expert_policy(spec, expert), spec, episodes, seed);
        return py::make_tuple(e.mean, e.stddev);
    }, py::arg("episodes") = 20, py::arg("seed") = 424242, py::arg("env") = KeyValues{});

    m.def("pseudo_reward", &reward::pseudo_reward_from_probability, py::arg("d"));
    m.def("hashing_loss_terms", [](const std::string& variant, double lambda, const Eigen::VectorXd& s1,
                                   const Eigen::VectorXd& r1, const Eigen::VectorXd& b1, int y1, const Eigen::VectorXd& s2,
                                   const Eigen::VectorXd& r2, const Eigen::VectorXd& b2, int y2) {
        const auto t = reward::hashing_loss_terms(reward::mask_for(reward::variant_from_string(variant)), lambda,
                                                  {s1, r1, b1, y1}, {s2, r2, b2, y2});
        py::dict d;
        d["reconstruction"] = t.reconstruction;
        d["binarization"] = t.binarization;
        d["contrastive"] = t.contrastive;
        d["total"] = t.total();
        return d;
    });

    m.def("spectral_complexity", [](std::vector<double> s, std::vector<double> b, std::vector<double> rho,
                                    std::size_t max_dimension) {
        return theory::spectral_complexity({std::move(s), std::move(b), std::move(rho), max_dimension});
    }, py::arg("spectral_norms"), py::arg("two_one_norms"), py::arg("lipschitz"), py::arg("max_dimension"));
    m.def("rademacher_bound", &theory::rademacher_bound, py::arg("frobenius"), py::arg("complexity"), py::arg("m"));
    m.def("generalization_bound", [](const KeyValues& values) {
        const auto inputs = theory::bound_inputs_from(values);
        const auto t = theory::generalization_bound_terms(inputs);
        py::dict d;
        d["gap_delta1"] = t.gap_delta1;
        d["gap_delta2"] = t.gap_delta2;
        d["concentration"] = t.concentration;
        d["rademacher"] = t.rademacher;
        d["training_slack"] = t.training_slack;
        d["total"] = t.total;
        return d;
    }, py::arg("inputs"));
    m.def("spectral_norm", [](const nn::Matrix& w, double tolerance, std::size_t max_iterations) {
        return theory::spectral_norm(w, tolerance, max_iterations);
    }, py::arg("weight"), py::arg("tolerance") = 1e-8, py::arg("max_iterations") = 1000);
    m.def("feature_frobenius", [](const nn::Matrix& features) { return theory::feature_frobenius(features); });

    m.def("spearman", [](const std::vector<double>& x, const std::vector<double>& y) { return harness::spearman(x, y); });
    m.def("default_config", [] { return harness::to_key_values(harness::ExperimentConfig{}); });
    m.def("imitate", [](const KeyValues& values) {
        const auto config = experiment_config(values);
        std::vector<std::filesystem::path> dirs;
        py::gil_scoped_release release;
        for (const auto& trial : harness::run_experiment(config)) dirs.push_back(trial.run_dir);
        return dirs;
    }, py::arg("config"), "Runs every configured seed; returns the run directories.");
}
