// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero if any fails.
//
//   acceptance               criteria 1-6 and 8
//   acceptance --published   criterion 7 only; needs MOUSEDYN_DATASET pointing
//                            at the released 40-user events file (exit 77 if
//                            unset)

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <thread>

#include "mousedyn/knn.hpp"
#include "mousedyn/metrics.hpp"
#include "mousedyn/pipeline.hpp"
#include "mousedyn/svm.hpp"
#include "mousedyn/synthetic.hpp"
#include "test_support.hpp"

using namespace mousedyn;

namespace {

struct Outcome {
    bool pass = true;
    std::ostringstream detail;

    void fail(const std::string& why) {
        if (pass) detail.str("");
        pass = false;
        detail << why << "; ";
    }
};

int failures = 0;

void criterion(int id, const std::string& title, double budget_s, const std::function<void(Outcome&)>& body) {
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    try {
        body(o);
    } catch (const std::exception& e) {
        o.fail(std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (budget_s > 0 && secs > budget_s) {
        std::ostringstream os;
        os << "runtime " << std::fixed << std::setprecision(1) << secs << " s over the " << budget_s << " s budget";
        o.fail(os.str());
    }
    if (!o.pass) ++failures;
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << id << ": " << title << " (" << o.detail.str()
              << std::fixed << std::setprecision(1) << secs << " s)" << std::endl;
}

std::string fmt(double v, int digits = 4) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(digits) << v;
    return os.str();
}

// ------------------------------------------------------------------ 1

void metrics_oracle(Outcome& o) {
    Rng rng(1001);
    double worst_auc = 0, worst_eer = 0;
    std::size_t rate_mismatches = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t n = 2 + rng.index(499);
        std::vector<double> s(n);
        std::vector<int> y(n);
        for (std::size_t i = 0; i < n; ++i) {
            s[i] = static_cast<double>(rng.index(1001)) / 1000.0;
            y[i] = static_cast<int>(rng.index(2));
        }
        y[0] = 1;
        y[1] = 0;
        const auto r = rates(confusion(s, y));
        const auto d = mdtest::direct_rates(s, y);
        if (r.acc != d.acc || r.fpr != d.fpr || r.fnr != d.fnr || r.precision != d.precision || r.recall != d.recall ||
            r.f1 != d.f1)
            ++rate_mismatches;
        worst_auc = std::max(worst_auc, std::abs(roc(s, y).auc - mdtest::pair_count_auc(s, y)));
        worst_eer = std::max(worst_eer, std::abs(eer(s, y) - mdtest::grid_eer(s, y)));
    }
    if (rate_mismatches) o.fail(std::to_string(rate_mismatches) + " sets with rate mismatches");
    if (worst_auc > 1e-12) o.fail("AUC error " + std::to_string(worst_auc));
    if (worst_eer > 1e-6) o.fail("EER error " + std::to_string(worst_eer));
    if (o.pass) o.detail << "1000 sets, max AUC error " << worst_auc << ", max EER error " << worst_eer << "; ";
}

// ------------------------------------------------------------------ 2

void knn_oracle(Outcome& o) {
    Rng rng(2002);
    std::size_t checked = 0, mismatches = 0;
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<std::vector<double>> rows;
        std::vector<int> labels;
        // Half the datasets live on a small integer grid so distances tie.
        const bool grid = trial % 2 == 0;
        for (int i = 0; i < 200; ++i) {
            if (grid)
                rows.push_back({double(rng.index(4)), double(rng.index(4)), double(rng.index(3))});
            else
                rows.push_back({rng.uniform(0, 1), rng.uniform(0, 1), rng.uniform(0, 1)});
            labels.push_back(static_cast<int>(rng.index(2)));
        }
        // Exact duplicates with opposite labels.
        rows[1] = rows[0];
        labels[1] = 1 - labels[0];
        const auto ds = mdtest::table(rows, labels);
        for (std::size_t k : {1u, 3u, 13u}) {
            const auto model = knn_fit(ds, k);
            for (int q = 0; q < 20; ++q) {
                const std::vector<double> query =
                    grid ? std::vector<double>{double(rng.index(4)), double(rng.index(4)), double(rng.index(3))}
                         : (q == 0 ? rows[0] : std::vector<double>{rng.uniform(0, 1), rng.uniform(0, 1), rng.uniform(0, 1)});
                const auto got = knn_predict(model, query);
                const auto [label, score] = mdtest::knn_oracle(rows, labels, query, k);
                ++checked;
                if (got.label != label || got.score != score) ++mismatches;
            }
        }
    }
    if (mismatches) o.fail(std::to_string(mismatches) + " of " + std::to_string(checked) + " predictions differ");
    else o.detail << checked << " predictions identical; ";
}

// ------------------------------------------------------------------ 3

void gradient_checks(Outcome& o) {
    double worst_ann = 0, worst_cnn = 0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const auto ann = mdtest::tiny_ann_fixture(seed);
        worst_ann = std::max(worst_ann, grad_check(ann.net, ann.inputs, ann.labels));
        const auto cnn = mdtest::tiny_cnn_fixture(seed);
        worst_cnn = std::max(worst_cnn, grad_check(cnn.net, cnn.inputs, cnn.labels));
    }
    if (worst_ann >= 1e-4) o.fail("ANN relative error " + std::to_string(worst_ann));
    if (worst_cnn >= 1e-4) o.fail("CNN relative error " + std::to_string(worst_cnn));
    if (o.pass) o.detail << "20 seeds, max relative error ANN " << worst_ann << ", CNN " << worst_cnn << "; ";
}

// ------------------------------------------------------------------ 4

void balance_and_determinism(Outcome& o) {
    for (std::size_t k : {2u, 4u, 40u})
        for (std::size_t n : {10u, 39u, 780u}) {
            SamplesByUser<int> users;
            for (std::size_t u = 0; u < k; ++u)
                for (std::size_t i = 0; i < n; ++i) users[int(u)].push_back(int(i));
            for (std::size_t target = 0; target < k; target += std::max<std::size_t>(1, k / 4)) {
                const auto ds = build_binary_dataset(int(target), users, 17);
                std::size_t pos = 0;
                std::map<int, std::size_t> per;
                for (std::size_t i = 0; i < ds.size(); ++i) {
                    if (ds.labels[i] == kGenuine) ++pos;
                    else ++per[ds.provenance[i].subject];
                }
                std::size_t lo = SIZE_MAX, hi = 0, neg = 0;
                for (std::size_t u = 0; u < k; ++u) {
                    if (u == target) continue;
                    const std::size_t c = per.count(int(u)) ? per.at(int(u)) : 0;
                    lo = std::min(lo, c);
                    hi = std::max(hi, c);
                    neg += c;
                }
                const std::string where = "k=" + std::to_string(k) + " n=" + std::to_string(n);
                if (pos != neg) o.fail(where + " unbalanced");
                if (hi - lo > 1) o.fail(where + " imposter spread " + std::to_string(hi - lo));
                if (k == 40 && n == 780 && (lo != 20 || hi != 20)) o.fail("k=40 n=780 is not 20 per imposter");
            }
        }

    const auto corpus = Corpus::build(synthesize_corpus(4, 1205, 11));
    for (auto kind : {ModelKind::knn, ModelKind::rf, ModelKind::svm}) {
        auto cfg = PipelineConfig::make(kind, Preset::ci, 23);
        const auto a = train_binary(corpus, 2, cfg);
        cfg.forest.workers = 3;
        const auto b = train_binary(corpus, 2, cfg);
        if (a.dump() != b.dump()) o.fail(to_string(kind) + " artifacts differ on rerun");
    }
    for (auto kind : {ModelKind::cnn, ModelKind::ann}) {
        auto cfg = PipelineConfig::make(kind, Preset::ci, 23);
        cfg.neural.epochs = 3;
        const auto train = [&] { return kind == ModelKind::ann ? train_multiclass(corpus, cfg) : train_binary(corpus, 1, cfg); };
        const auto a = train(), b = train();
        if (a.at("history") != b.at("history")) o.fail(to_string(kind) + " histories differ on rerun");
        if (a.dump() != b.dump()) o.fail(to_string(kind) + " artifacts differ on rerun");
    }
    if (o.pass) o.detail << "9 (k, n) cases balanced, k=40 n=780 gives 20 per imposter, reruns identical; ";
}

// ------------------------------------------------------------------ 5

void svm_dual(Outcome& o) {
    Rng rng(5005);
    double worst_obj = 0, worst_kkt = 0;
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<std::vector<double>> x;
        std::vector<int> y, pm;
        for (int i = 0; i < 20; ++i) {
            const int label = i % 2;
            std::vector<double> r = {rng.normal(0, 1), rng.normal(0, 1)};
            r[0] = label ? std::abs(r[0]) + 0.5 : -std::abs(r[0]) - 0.5;
            x.push_back(r);
            y.push_back(label);
            pm.push_back(label ? 1 : -1);
        }
        SvmConfig cfg;
        const auto t = svm_train(mdtest::table(x, y), cfg);
        const auto oracle = mdtest::svm_dual_oracle(x, pm, t.model.c, t.model.gamma);
        worst_obj = std::max(worst_obj, std::abs(t.objective - oracle.objective));
        double eq = 0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double a = t.alpha[i];
            eq += a * t.y[i];
            if (a < 0 || a > cfg.c) o.fail("alpha outside the box");
            const double m = t.y[i] * svm_decision(t.model, x[i]);
            double v = 0;
            if (a == 0) v = std::max(0.0, 1 - m);
            else if (a == cfg.c) v = std::max(0.0, m - 1);
            else v = std::abs(m - 1);
            worst_kkt = std::max(worst_kkt, v);
        }
        worst_kkt = std::max(worst_kkt, std::abs(eq));
    }
    if (worst_obj > 1e-3) o.fail("dual objective gap " + std::to_string(worst_obj));
    if (worst_kkt > 1e-3) o.fail("KKT violation " + std::to_string(worst_kkt));
    if (o.pass) o.detail << "20 sets, max objective gap " << worst_obj << ", max KKT violation " << worst_kkt << "; ";
}

// ------------------------------------------------------------------ 6

void separable_profiles(Outcome& o) {
    // 2000 actions per user: enough optimizer steps for the coordinate ANN
    // within the 20 CI epochs.
    const auto corpus = Corpus::build(synthesize_corpus(4, 20005, 6));
    const std::size_t workers = std::max(1u, std::thread::hardware_concurrency());
    for (auto kind : {ModelKind::knn, ModelKind::rf, ModelKind::svm, ModelKind::cnn}) {
        const auto cfg = PipelineConfig::make(kind, Preset::ci, 6);
        const auto evals = evaluate_all_binary(train_all_binary(corpus, cfg, workers), corpus, workers);
        double worst = 1;
        for (const auto& e : evals) worst = std::min(worst, e.metrics.acc);
        o.detail << to_string(kind) << " min ACC " << fmt(worst) << ", ";
        if (worst < 0.95) o.fail(to_string(kind) + " min user ACC " + fmt(worst));
    }
    const auto cfg = PipelineConfig::make(ModelKind::ann, Preset::ci, 6);
    const auto ev = evaluate_multiclass(train_multiclass(corpus, cfg), corpus);
    o.detail << "ann test ACC " << fmt(ev.peak_test_accuracy) << "; ";
    if (ev.classes != 4) o.fail("ann has " + std::to_string(ev.classes) + " classes");
    if (ev.peak_test_accuracy < 0.95) o.fail("ann test ACC " + fmt(ev.peak_test_accuracy));
}

// ------------------------------------------------------------------ 8

void streaming_policy(Outcome& o) {
    const auto run = [](const std::vector<double>& scores) {
        TrustMonitor m;
        std::vector<Decision> out;
        for (double s : scores) out.push_back(m.update(s));
        return out;
    };
    const auto same_as_hand = [&](const std::vector<double>& scores, const std::string& name) {
        const auto got = run(scores);
        const auto want = mdtest::ewma_oracle(scores);
        for (std::size_t i = 0; i < got.size(); ++i) {
            if (got[i].trust != want[i].trust) return o.fail(name + ": trust differs at update " + std::to_string(i + 1));
            if ((got[i].status == TrustStatus::alarm) != want[i].alarm)
                return o.fail(name + ": alarm differs at update " + std::to_string(i + 1));
        }
    };

    const std::vector<double> ones(30, 1.0), zeros(6, 0.0);
    std::vector<double> alternating;
    for (int i = 0; i < 60; ++i) alternating.push_back(i % 2 == 0 ? 1.0 : 0.0);
    same_as_hand(ones, "constant 1");
    same_as_hand(zeros, "constant 0");
    same_as_hand(alternating, "alternating");

    const auto up = run(ones);
    for (std::size_t i = 0; i < up.size(); ++i) {
        if (up[i].status != TrustStatus::ok) o.fail("constant 1 left ok");
        if (i && !(up[i].trust > up[i - 1].trust)) o.fail("constant 1 is not increasing");
    }
    const auto down = run(zeros);
    if (std::abs(down[1].trust - 0.448) > 1e-15) o.fail("constant 0 trust at update 2 is " + fmt(down[1].trust, 6));
    if (down[0].status != TrustStatus::ok || down[1].status != TrustStatus::suspect ||
        down[2].status != TrustStatus::suspect || down[3].status != TrustStatus::alarm)
        o.fail("constant 0 does not alarm first at update 4");
    for (const auto& d : run(alternating))
        if (d.status == TrustStatus::alarm) o.fail("alternating scores alarmed");
    if (o.pass) o.detail << "constant 1 never alarms, constant 0 alarms at update 4, alternating never alarms; ";
}

// ------------------------------------------------------------------ 7

int published_numbers() {
    const char* path = std::getenv("MOUSEDYN_DATASET");
    if (!path || !*path) {
        std::cout << "SKIP criterion 7: published-number reproduction (set MOUSEDYN_DATASET to the released events file)"
                  << std::endl;
        return 77;
    }
    criterion(7, "published-number reproduction on the released 40-user dataset", 0, [&](Outcome& o) {
        std::ifstream in(path);
        if (!in) throw DataError(std::string("cannot read ") + path);
        ParseOptions opts;
        opts.lenient = true;
        const auto corpus = Corpus::build(parse_events(in, opts).sessions);
        const std::size_t workers = std::max(1u, std::thread::hardware_concurrency());
        std::map<ModelKind, double> mean;
        for (auto kind : {ModelKind::rf, ModelKind::knn, ModelKind::svm, ModelKind::cnn}) {
            const auto cfg = PipelineConfig::make(kind, Preset::release, 0);
            const auto evals = evaluate_all_binary(train_all_binary(corpus, cfg, workers), corpus, workers);
            std::vector<UserMetrics> per_user;
            for (const auto& e : evals) per_user.push_back(e.metrics);
            mean[kind] = aggregate_top10(per_user).metrics.at("acc").mean;
            o.detail << to_string(kind) << " " << fmt(mean[kind]) << ", ";
        }
        const auto ann = evaluate_multiclass(train_multiclass(corpus, PipelineConfig::make(ModelKind::ann, Preset::release, 0)), corpus);
        o.detail << "ann peak " << fmt(ann.peak_test_accuracy) << "; ";

        const auto within = [&](ModelKind k, double target, double tol) {
            if (std::abs(mean[k] - target) > tol)
                o.fail(to_string(k) + " " + fmt(mean[k]) + " not within " + fmt(tol, 2) + " of " + fmt(target));
        };
        within(ModelKind::rf, 0.6506, 0.05);
        within(ModelKind::knn, 0.6155, 0.05);
        within(ModelKind::svm, 0.6071, 0.06);
        if (mean[ModelKind::cnn] < 0.80) o.fail("cnn " + fmt(mean[ModelKind::cnn]) + " below 0.80");
        if (ann.peak_test_accuracy < 0.85) o.fail("ann " + fmt(ann.peak_test_accuracy) + " below 0.85");
        if (!(mean[ModelKind::cnn] > mean[ModelKind::rf])) o.fail("deep binary does not beat rf");
        if (!(mean[ModelKind::rf] > mean[ModelKind::knn] && mean[ModelKind::rf] > mean[ModelKind::svm]))
            o.fail("rf does not beat knn and svm");
    });
    return failures ? 1 : 0;
}

}  // namespace

int main(int argc, char** argv) {
    const std::set<std::string> args(argv + 1, argv + argc);
    if (args.count("--published")) return published_numbers();

    criterion(1, "metrics match direct definitions, pair-counting AUC and grid EER", 30, metrics_oracle);
    criterion(2, "KNN matches an exhaustive scan for K in {1, 3, 13}", 30, knn_oracle);
    criterion(3, "analytic gradients match central differences", 60, gradient_checks);
    criterion(4, "balanced binary datasets and deterministic training", 0, balance_and_determinism);
    criterion(5, "SMO reaches the dual optimum and satisfies KKT", 60, svm_dual);
    criterion(6, "every model family separates 4 synthetic profiles", 600, separable_profiles);
    criterion(8, "EWMA trust trajectories follow the recurrence", 1, streaming_policy);
    std::cout << (failures ? "FAIL" : "PASS") << " overall: " << failures << " failing criteria" << std::endl;
    return failures ? 1 : 0;
}
