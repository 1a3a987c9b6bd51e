#pragma once

// Soft-margin RBF support vector machine trained by sequential minimal
// optimization with second-order working-set selection.

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "mousedyn/common.hpp"
#include "mousedyn/datasets.hpp"

namespace mousedyn {

struct SvmConfig {
    double c = 1.0;
    double gamma = 0.0;  // 0 = 1 / (d * var(X)) over the training matrix
    double tol = 1e-3;
    std::size_t max_passes = 200;  // iteration budget is max_passes * n
};

struct SvmModel {
    std::vector<std::vector<double>> support_vectors;
    std::vector<double> dual_coef;  // alpha_i * y_i
    double bias = 0;
    double gamma = 1;
    double c = 1;
};

/// Full solver output; the model plus the dual state it came from.
struct SvmTraining {
    SvmModel model;
    std::vector<double> alpha;  // one per training row
    std::vector<int> y;         // +1 / -1
    double objective = 0;       // dual objective sum(a) - 1/2 a'Qa
    double max_violation = 0;   // final KKT gap m(a) - M(a)
    std::size_t iterations = 0;
};

inline double rbf_kernel(std::span<const double> a, std::span<const double> b, double gamma) {
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return std::exp(-gamma * s);
}

inline double default_gamma(const std::vector<std::vector<double>>& rows) {
    const std::size_t d = rows.front().size();
    double sum = 0, sq = 0;
    std::size_t count = 0;
    for (const auto& r : rows)
        for (double v : r) {
            sum += v;
            sq += v * v;
            ++count;
        }
    const double mean = sum / static_cast<double>(count);
    const double var = sq / static_cast<double>(count) - mean * mean;
    return var > 0 ? 1.0 / (static_cast<double>(d) * var) : 1.0;
}

/// Labels equal to 1 are the positive class; every other value is negative,
/// so {0,1} and {-1,+1} labelings train the same model.
inline SvmTraining svm_train(const LabeledDataset<std::vector<double>>& train, const SvmConfig& cfg = {}) {
    const std::size_t n = train.size();
    std::vector<int> y(n);
    std::size_t pos = 0;
    for (std::size_t i = 0; i < n; ++i) {
        y[i] = train.labels[i] == 1 ? 1 : -1;
        pos += y[i] == 1;
    }
    if (pos == 0 || pos == n) throw DataError("svm: training data must contain both classes");
    if (!(cfg.c > 0)) throw ConfigError("svm: C must be positive");
    const double gamma = cfg.gamma > 0 ? cfg.gamma : default_gamma(train.rows);
    if (!(gamma > 0) || !std::isfinite(gamma)) throw ConfigError("svm: gamma must be positive");
    const double c = cfg.c;

    std::vector<double> kernel(n * n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i; j < n; ++j) kernel[i * n + j] = kernel[j * n + i] = rbf_kernel(train.rows[i], train.rows[j], gamma);
    const auto K = [&](std::size_t i, std::size_t j) { return kernel[i * n + j]; };

    // Minimizes f(a) = 1/2 a'Qa - e'a with Q_ij = y_i y_j K_ij; G = Qa - e.
    std::vector<double> alpha(n, 0.0), grad(n, -1.0);
    const auto in_up = [&](std::size_t t) { return (y[t] == 1 && alpha[t] < c) || (y[t] == -1 && alpha[t] > 0); };
    const auto in_low = [&](std::size_t t) { return (y[t] == 1 && alpha[t] > 0) || (y[t] == -1 && alpha[t] < c); };
    constexpr double tau = 1e-12;
    const std::size_t max_iter = std::max<std::size_t>(cfg.max_passes, 1) * std::max<std::size_t>(n, 10);

    std::size_t iter = 0;
    double gap = 0;
    while (true) {
        double gmax = -std::numeric_limits<double>::infinity();
        std::size_t i_sel = n;
        for (std::size_t t = 0; t < n; ++t)
            if (in_up(t) && -y[t] * grad[t] >= gmax) {
                gmax = -y[t] * grad[t];
                i_sel = t;
            }
        double gmax2 = -std::numeric_limits<double>::infinity();
        std::size_t j_sel = n;
        double obj_min = std::numeric_limits<double>::infinity();
        for (std::size_t t = 0; t < n; ++t) {
            if (!in_low(t)) continue;
            gmax2 = std::max(gmax2, static_cast<double>(y[t]) * grad[t]);
            if (i_sel == n) continue;
            const double b = gmax + y[t] * grad[t];
            if (b > 0) {
                double a = K(i_sel, i_sel) + K(t, t) - 2.0 * K(i_sel, t);
                if (a <= 0) a = tau;
                if (-(b * b) / a <= obj_min) {
                    obj_min = -(b * b) / a;
                    j_sel = t;
                }
            }
        }
        gap = gmax + gmax2;
        if (gap < cfg.tol || i_sel == n || j_sel == n) break;
        if (iter >= max_iter)
            throw ModelError("svm: SMO did not converge after " + std::to_string(iter) +
                             " iterations; max KKT violation " + format_double(gap));
        ++iter;

        const std::size_t i = i_sel, j = j_sel;
        const double old_ai = alpha[i], old_aj = alpha[j];
        const double qij = y[i] * y[j] * K(i, j);
        if (y[i] != y[j]) {
            double quad = K(i, i) + K(j, j) + 2.0 * qij;
            if (quad <= 0) quad = tau;
            const double delta = (-grad[i] - grad[j]) / quad;
            const double diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if (diff > 0) {
                if (alpha[j] < 0) {
                    alpha[j] = 0;
                    alpha[i] = diff;
                }
            } else if (alpha[i] < 0) {
                alpha[i] = 0;
                alpha[j] = -diff;
            }
            if (diff > 0) {
                if (alpha[i] > c) {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if (alpha[j] > c) {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            double quad = K(i, i) + K(j, j) - 2.0 * qij;
            if (quad <= 0) quad = tau;
            const double delta = (grad[i] - grad[j]) / quad;
            const double sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if (sum > c) {
                if (alpha[i] > c) {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if (alpha[j] < 0) {
                alpha[j] = 0;
                alpha[i] = sum;
            }
            if (sum > c) {
                if (alpha[j] > c) {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if (alpha[i] < 0) {
                alpha[i] = 0;
                alpha[j] = sum;
            }
        }

        const double di = alpha[i] - old_ai, dj = alpha[j] - old_aj;
        for (std::size_t t = 0; t < n; ++t)
            grad[t] += y[t] * (y[i] * K(t, i) * di + y[j] * K(t, j) * dj);
    }

    // b = mean(y_i - sum_j a_j y_j K_ij) over free vectors; midpoint of the
    // feasible interval when none is free.
    double free_sum = 0;
    std::size_t free_count = 0;
    double ub = std::numeric_limits<double>::infinity(), lb = -std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t < n; ++t) {
        const double yg = y[t] * grad[t];  // = f_nobias(x_t) - y_t
        if (alpha[t] > 0 && alpha[t] < c) {
            free_sum += -yg;
            ++free_count;
        } else if ((alpha[t] >= c && y[t] == -1) || (alpha[t] <= 0 && y[t] == 1)) {
            lb = std::max(lb, -yg);
        } else {
            ub = std::min(ub, -yg);
        }
    }
    double bias = 0;
    if (free_count > 0)
        bias = free_sum / static_cast<double>(free_count);
    else if (std::isfinite(ub) && std::isfinite(lb))
        bias = 0.5 * (ub + lb);
    else
        bias = std::isfinite(ub) ? ub : lb;

    SvmTraining out;
    out.y = y;
    out.alpha = alpha;
    out.iterations = iter;
    out.max_violation = std::max(gap, 0.0);
    double quad = 0, lin = 0;
    for (std::size_t t = 0; t < n; ++t) {
        lin += alpha[t];
        quad += alpha[t] * (grad[t] + 1.0);  // (Qa)_t = G_t + 1
    }
    out.objective = lin - 0.5 * quad;
    out.model.gamma = gamma;
    out.model.c = c;
    out.model.bias = bias;
    for (std::size_t t = 0; t < n; ++t)
        if (alpha[t] > 0) {
            out.model.support_vectors.push_back(train.rows[t]);
            out.model.dual_coef.push_back(alpha[t] * y[t]);
        }
    return out;
}

inline SvmModel svm_fit(const LabeledDataset<std::vector<double>>& train, const SvmConfig& cfg = {}) {
    return svm_train(train, cfg).model;
}

/// f(x) = sum_i alpha_i y_i K(x_i, x) + b.
inline double svm_decision(const SvmModel& model, std::span<const double> query) {
    if (!model.support_vectors.empty() && query.size() != model.support_vectors.front().size())
        throw DataError("svm: query dimension mismatch");
    double f = model.bias;
    for (std::size_t i = 0; i < model.support_vectors.size(); ++i)
        f += model.dual_coef[i] * rbf_kernel(model.support_vectors[i], query, model.gamma);
    return f;
}

/// Logistic squashing of the decision value for [0,1] reporting; score >= 0.5
/// exactly when the decision value is >= 0.
inline double svm_score(const SvmModel& model, std::span<const double> query) {
    return 1.0 / (1.0 + std::exp(-svm_decision(model, query)));
}

inline nlohmann::json to_json(const SvmModel& m) {
    return {{"support_vectors", m.support_vectors}, {"dual_coef", m.dual_coef}, {"bias", m.bias},
            {"gamma", m.gamma},                     {"c", m.c}};
}

inline SvmModel svm_from_json(const nlohmann::json& j) {
    SvmModel m;
    m.support_vectors = j.at("support_vectors").get<std::vector<std::vector<double>>>();
    m.dual_coef = j.at("dual_coef").get<std::vector<double>>();
    m.bias = j.at("bias").get<double>();
    m.gamma = j.at("gamma").get<double>();
    m.c = j.at("c").get<double>();
    if (m.dual_coef.size() != m.support_vectors.size()) throw ModelError("svm artifact is inconsistent");
    return m;
}

}  // namespace mousedyn
