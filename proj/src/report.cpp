#include "geomlens/report.hpp"

#include "geomlens/attention_analysis.hpp"
#include "geomlens/decompose.hpp"
#include "geomlens/errors.hpp"
#include "geomlens/fourier.hpp"
#include "geomlens/geometry_metrics.hpp"
#include "geomlens/tensor_io.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <mutex>
#include <sstream>
#include <thread>

namespace geomlens::report {

using nlohmann::json;

namespace {

std::string num(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

std::string opt_num(const std::optional<double>& v) { return v ? num(*v) : std::string(); }

json opt_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

void run_pool(std::size_t jobs, int threads, const std::function<void(std::size_t)>& fn) {
    const auto n = std::min<std::size_t>(jobs, static_cast<std::size_t>(std::max(1, threads)));
    if (n <= 1) {
        for (std::size_t i = 0; i < jobs; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(n);
    for (std::size_t w = 0; w < n; ++w)
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < jobs; i = next++) fn(i);
        });
    for (auto& th : pool) th.join();
}

struct LayerPlan {
    std::filesystem::path path;
    int layer = 0;
    bool skip = false;
};

struct HeadPlan {
    HeadInput input;
    int layer = 0;
};

// Reads every header up front so that the final layer is known before any
// payload is loaded.
std::vector<LayerPlan> plan_layers(const RunConfig& cfg, std::vector<Failure>& failures) {
    std::vector<LayerPlan> plans;
    for (std::size_t i = 0; i < cfg.embeddings.size(); ++i) {
        const auto& p = cfg.embeddings[i];
        try {
            const json h = io::read_header(p);
            LayerPlan lp;
            lp.path = p;
            lp.layer = h.contains("layer") ? h["layer"].get<int>() : static_cast<int>(i);
            plans.push_back(lp);
        } catch (const std::exception& ex) {
            failures.push_back({p.string(), ex.what(), exit_code_for(ex)});
        }
    }
    int final_layer = cfg.final_layer.value_or(-1);
    if (!cfg.final_layer)
        for (const auto& lp : plans) final_layer = std::max(final_layer, lp.layer);
    for (auto& lp : plans) {
        if (cfg.skip_final_layer && lp.layer == final_layer) lp.skip = true;
        if (!cfg.include_layer0 && lp.layer == 0) lp.skip = true;
    }
    return plans;
}

std::optional<EmbeddingTensor> load_layer(const LayerPlan& lp, const RunConfig& cfg) {
    EmbeddingTensor e = io::read_embedding(lp.path);
    e.layer = lp.layer;
    if (!cfg.drop_first_token) return e;
    ArtifactOptions opts;
    opts.drop_first_token = !e.dropped_first_token;
    return drop_artifacts(std::move(e), opts);
}

struct LayerAnalysis {
    LayerRow row;
    MeanComponents means;
};

LayerAnalysis analyze(const EmbeddingTensor& e, const std::vector<int>& Ks, int spectrum_columns) {
    e.validate();
    LayerAnalysis out;
    out.means = decompose_means(e);
    const auto& m = out.means;
    const auto basis = PositionalBasis::from_rows(m.pos);
    const auto spec = spectral::summarize(m.pos, e, m.mu);
    const auto sim = geometry::similarity_report(m.pos, m.ctx, e.seq_labels);
    const auto g = fourier::gram(basis);
    const auto freq = fourier::dct2(g.G, Ks);

    LayerRow& row = out.row;
    row.layer = e.layer;
    row.T = static_cast<int>(e.num_positions());
    row.rank_gap = spec.rank_gap;
    row.rank_energy = spec.rank_energy;
    row.stable_rank = spec.stable_rank;
    row.relative_norm = spec.relative_norm;
    row.inter = sim.clusters.inter;
    row.intra = sim.clusters.intra;
    row.incoherence_mean = sim.incoherence.mean;
    row.incoherence_max = sim.incoherence.max;
    row.r = freq.ratios;
    const auto n = std::min<std::size_t>(spec.singular_values.size(), static_cast<std::size_t>(spectrum_columns));
    row.spectrum.assign(spec.singular_values.begin(), spec.singular_values.begin() + static_cast<std::ptrdiff_t>(n));
    return out;
}

std::string r_name(int K) { return "r_" + std::to_string(K); }

std::map<std::string, SummaryStat> summarize_rows(const std::vector<LayerRow>& rows, const std::vector<int>& Ks) {
    std::map<std::string, std::vector<double>> cols;
    for (const auto& r : rows) {
        cols["rank_gap"].push_back(r.rank_gap);
        cols["rank_energy"].push_back(r.rank_energy);
        cols["stable_rank"].push_back(r.stable_rank);
        cols["relative_norm"].push_back(r.relative_norm);
        if (r.inter) cols["inter"].push_back(*r.inter);
        if (r.intra) cols["intra"].push_back(*r.intra);
        cols["incoherence_mean"].push_back(r.incoherence_mean);
        cols["incoherence_max"].push_back(r.incoherence_max);
        for (int K : Ks) cols[r_name(K)].push_back(r.r.at(K));
    }
    std::map<std::string, SummaryStat> out;
    for (const auto& [k, v] : cols) out[k] = summarize_values(v);
    return out;
}

int combined_exit(bool any_success, const std::vector<Failure>& failures) {
    if (failures.empty()) return 0;
    if (any_success) return 4;
    return failures.front().exit_code;
}

void write_text(const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + p.string() + "' for writing");
    out << text;
    if (!out) throw IoError("failed writing '" + p.string() + "'");
}

}  // namespace

void RunConfig::validate() const {
    if (embeddings.empty()) throw InvalidInput("no embedding inputs given");
    for (const auto& p : embeddings)
        if (!std::filesystem::is_regular_file(p)) throw InvalidInput("input not found: " + p.string());
    for (const auto& h : heads) {
        if (!std::filesystem::is_regular_file(h.wq)) throw InvalidInput("input not found: " + h.wq.string());
        if (!std::filesystem::is_regular_file(h.wk)) throw InvalidInput("input not found: " + h.wk.string());
    }
    if (Ks.empty()) throw InvalidInput("K list is empty");
    for (int K : Ks)
        if (K < 1) throw InvalidInput("every K must be >= 1");
    if (threads < 1) throw InvalidInput("threads must be >= 1");
    if (spectrum_columns < 0) throw InvalidInput("spectrum_columns must be >= 0");
    if (dissect_K < 1) throw InvalidInput("dissection K must be >= 1");
    if (!(dissect_quantile >= 0.0 && dissect_quantile <= 1.0)) throw InvalidInput("quantile must lie in [0, 1]");
}

int exit_code_for(const std::exception& ex) {
    if (dynamic_cast<const NumericalFailure*>(&ex)) return 3;
    if (dynamic_cast<const Error*>(&ex)) return 2;
    if (dynamic_cast<const std::bad_alloc*>(&ex)) return 3;
    return 3;
}

SummaryStat summarize_values(const std::vector<double>& v) {
    SummaryStat s;
    if (v.empty()) return s;
    double sum = 0.0;
    for (double x : v) sum += x;
    s.mean = sum / static_cast<double>(v.size());
    if (v.size() > 1) {
        double ss = 0.0;
        for (double x : v) ss += (x - s.mean) * (x - s.mean);
        s.std = std::sqrt(ss / static_cast<double>(v.size() - 1));
    }
    return s;
}

int Report::exit_code() const { return combined_exit(!layers.empty(), failures); }
int OodReport::exit_code() const { return combined_exit(!layers.empty(), failures); }

LayerRow analyze_layer(const EmbeddingTensor& e, const std::vector<int>& Ks, int spectrum_columns) {
    return analyze(e, Ks, spectrum_columns).row;
}

Report run_report(const RunConfig& cfg) {
    cfg.validate();
    Report rep;
    auto plans = plan_layers(cfg, rep.failures);

    std::vector<HeadPlan> head_plans;
    for (std::size_t i = 0; i < cfg.heads.size(); ++i) {
        try {
            const json h = io::read_header(cfg.heads[i].wq);
            head_plans.push_back({cfg.heads[i], h.contains("layer") ? h["layer"].get<int>() : 0});
        } catch (const std::exception& ex) {
            rep.failures.push_back({cfg.heads[i].wq.string(), ex.what(), exit_code_for(ex)});
        }
    }

    std::vector<std::size_t> todo;
    for (std::size_t i = 0; i < plans.size(); ++i) {
        if (plans[i].skip)
            rep.skipped_layers.push_back(plans[i].layer);
        else
            todo.push_back(i);
    }

    struct Slot {
        std::optional<LayerRow> row;
        std::vector<HeadRow> heads;
        std::vector<Failure> failures;
    };
    std::vector<Slot> slots(todo.size());

    run_pool(todo.size(), cfg.threads, [&](std::size_t j) {
        const LayerPlan& lp = plans[todo[j]];
        Slot& slot = slots[j];
        LayerAnalysis la;
        try {
            const auto e = load_layer(lp, cfg);
            if (!e) return;
            la = analyze(*e, cfg.Ks, cfg.spectrum_columns);
            slot.row = la.row;
        } catch (const std::exception& ex) {
            slot.failures.push_back({lp.path.string(), ex.what(), exit_code_for(ex)});
            return;
        }
        for (const auto& hp : head_plans) {
            if (hp.layer != lp.layer) continue;
            try {
                const auto w = io::read_attention_weights(hp.input.wq, hp.input.wk);
                if (w.dim() != la.means.pos.cols()) throw InvalidInput("head dimension does not match embeddings");
                const Matrix W = w.bilinear();
                const Matrix pp = attention::pos_pos_constituent(la.means.pos, la.means.mu, W);
                const auto dis = attention::dissect_weights(W, la.means.pos, cfg.dissect_K, cfg.dissect_quantile);
                HeadRow hr;
                hr.layer = lp.layer;
                hr.head = w.head;
                hr.argmax_locality = attention::argmax_locality_ratio(pp, true);
                hr.energy_fraction = dis.energy_fraction;
                hr.K = dis.K;
                slot.heads.push_back(hr);
            } catch (const std::exception& ex) {
                slot.failures.push_back({hp.input.wq.string(), ex.what(), exit_code_for(ex)});
            }
        }
    });

    std::vector<int> analyzed;
    for (const auto& lp : plans)
        if (!lp.skip) analyzed.push_back(lp.layer);
    for (const auto& hp : head_plans)
        if (std::find(analyzed.begin(), analyzed.end(), hp.layer) == analyzed.end())
            rep.failures.push_back({hp.input.wq.string(), "no analyzed embedding for layer " + std::to_string(hp.layer), 2});

    for (auto& s : slots) {
        if (s.row) rep.layers.push_back(*s.row);
        rep.heads.insert(rep.heads.end(), s.heads.begin(), s.heads.end());
        rep.failures.insert(rep.failures.end(), s.failures.begin(), s.failures.end());
    }
    std::stable_sort(rep.layers.begin(), rep.layers.end(),
                     [](const LayerRow& a, const LayerRow& b) { return a.layer < b.layer; });
    std::stable_sort(rep.heads.begin(), rep.heads.end(), [](const HeadRow& a, const HeadRow& b) {
        return a.layer != b.layer ? a.layer < b.layer : a.head < b.head;
    });
    std::sort(rep.skipped_layers.begin(), rep.skipped_layers.end());
    rep.summary = summarize_rows(rep.layers, cfg.Ks);
    return rep;
}

OodReport run_ood_report(const RunConfig& cfg) {
    cfg.validate();
    OodReport rep;
    auto plans = plan_layers(cfg, rep.failures);
    std::vector<std::size_t> todo;
    for (std::size_t i = 0; i < plans.size(); ++i) {
        if (plans[i].skip)
            rep.skipped_layers.push_back(plans[i].layer);
        else
            todo.push_back(i);
    }
    std::vector<std::optional<OodRow>> rows(todo.size());
    std::vector<std::optional<Failure>> fails(todo.size());
    run_pool(todo.size(), cfg.threads, [&](std::size_t j) {
        const LayerPlan& lp = plans[todo[j]];
        try {
            const auto e = load_layer(lp, cfg);
            if (!e) return;
            e->validate();
            const auto m = decompose_means(*e);
            const auto g = fourier::gram(PositionalBasis::from_rows(m.pos));
            const auto freq = fourier::dct2(g.G, {10});
            OodRow r;
            r.layer = lp.layer;
            r.rank = spectral::rank_estimate(m.pos, cfg.ood_rank_method);
            r.r10 = freq.ratios.at(10);
            rows[j] = r;
        } catch (const std::exception& ex) {
            fails[j] = Failure{lp.path.string(), ex.what(), exit_code_for(ex)};
        }
    });
    for (std::size_t j = 0; j < todo.size(); ++j) {
        if (rows[j]) rep.layers.push_back(*rows[j]);
        if (fails[j]) rep.failures.push_back(*fails[j]);
    }
    std::stable_sort(rep.layers.begin(), rep.layers.end(),
                     [](const OodRow& a, const OodRow& b) { return a.layer < b.layer; });
    std::sort(rep.skipped_layers.begin(), rep.skipped_layers.end());
    std::vector<double> ranks, r10;
    for (const auto& r : rep.layers) {
        ranks.push_back(r.rank);
        r10.push_back(r.r10);
    }
    rep.summary["rank"] = summarize_values(ranks);
    rep.summary["r_10"] = summarize_values(r10);
    return rep;
}

std::vector<std::string> layer_columns(const std::vector<int>& Ks) {
    std::vector<std::string> cols = {"layer",         "T",     "rank_gap", "rank_energy",      "stable_rank",
                                     "relative_norm", "inter", "intra",    "incoherence_mean", "incoherence_max"};
    for (int K : Ks) cols.push_back(r_name(K));
    return cols;
}

std::string layers_csv(const Report& r, const std::vector<int>& Ks) {
    std::ostringstream out;
    const auto cols = layer_columns(Ks);
    for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << cols[i];
    out << '\n';
    for (const auto& row : r.layers) {
        out << row.layer << ',' << row.T << ',' << row.rank_gap << ',' << row.rank_energy << ','
            << num(row.stable_rank) << ',' << num(row.relative_norm) << ',' << opt_num(row.inter) << ','
            << opt_num(row.intra) << ',' << num(row.incoherence_mean) << ',' << num(row.incoherence_max);
        for (int K : Ks) out << ',' << num(row.r.at(K));
        out << '\n';
    }
    // summary rows: mean then std; T is not summarized
    for (int which = 0; which < 2; ++which) {
        out << (which == 0 ? "mean" : "std") << ',';
        for (std::size_t i = 2; i < cols.size(); ++i) {
            out << ',';
            const auto it = r.summary.find(cols[i]);
            if (it != r.summary.end()) out << num(which == 0 ? it->second.mean : it->second.std);
        }
        out << '\n';
    }
    return out.str();
}

std::string spectrum_csv(const Report& r) {
    std::size_t width = 0;
    for (const auto& row : r.layers) width = std::max(width, row.spectrum.size());
    std::ostringstream out;
    out << "layer";
    for (std::size_t i = 1; i <= width; ++i) out << ",sigma_" << i;
    out << '\n';
    for (const auto& row : r.layers) {
        out << row.layer;
        for (std::size_t i = 0; i < width; ++i) {
            out << ',';
            if (i < row.spectrum.size()) out << num(row.spectrum[i]);
        }
        out << '\n';
    }
    return out.str();
}

std::string heads_csv(const Report& r) {
    std::ostringstream out;
    out << "layer,head,argmax_locality,energy_fraction,K\n";
    for (const auto& h : r.heads)
        out << h.layer << ',' << h.head << ',' << num(h.argmax_locality) << ',' << num(h.energy_fraction) << ','
            << h.K << '\n';
    return out.str();
}

std::string ood_csv(const OodReport& r) {
    std::ostringstream out;
    out << "layer,rank,r_10\n";
    for (const auto& row : r.layers) out << row.layer << ',' << row.rank << ',' << num(row.r10) << '\n';
    for (int which = 0; which < 2; ++which) {
        const auto pick = [&](const std::string& k) {
            const auto& s = r.summary.at(k);
            return num(which == 0 ? s.mean : s.std);
        };
        out << (which == 0 ? "mean" : "std") << ',' << pick("rank") << ',' << pick("r_10") << '\n';
    }
    return out.str();
}

namespace {

json summary_json(const std::map<std::string, SummaryStat>& s) {
    json out = json::object();
    for (const auto& [k, v] : s) out[k] = {{"mean", v.mean}, {"std", v.std}};
    return out;
}

json failures_json(const std::vector<Failure>& f) {
    json out = json::array();
    for (const auto& x : f) out.push_back({{"input", x.input}, {"error", x.message}, {"exit_code", x.exit_code}});
    return out;
}

}  // namespace

json to_json(const Report& r, const std::vector<int>& Ks) {
    json layers = json::array();
    for (const auto& row : r.layers) {
        json j = {{"layer", row.layer},
                  {"T", row.T},
                  {"rank_gap", row.rank_gap},
                  {"rank_energy", row.rank_energy},
                  {"stable_rank", row.stable_rank},
                  {"relative_norm", row.relative_norm},
                  {"inter", opt_json(row.inter)},
                  {"intra", opt_json(row.intra)},
                  {"incoherence_mean", row.incoherence_mean},
                  {"incoherence_max", row.incoherence_max},
                  {"spectrum", row.spectrum}};
        for (int K : Ks) j[r_name(K)] = row.r.at(K);
        layers.push_back(std::move(j));
    }
    json heads = json::array();
    for (const auto& h : r.heads)
        heads.push_back({{"layer", h.layer},
                         {"head", h.head},
                         {"argmax_locality", h.argmax_locality},
                         {"energy_fraction", h.energy_fraction},
                         {"K", h.K}});
    return {{"layers", layers},
            {"heads", heads},
            {"summary", summary_json(r.summary)},
            {"skipped_layers", r.skipped_layers},
            {"failures", failures_json(r.failures)}};
}

json to_json(const OodReport& r) {
    json layers = json::array();
    for (const auto& row : r.layers) layers.push_back({{"layer", row.layer}, {"rank", row.rank}, {"r_10", row.r10}});
    return {{"layers", layers},
            {"summary", summary_json(r.summary)},
            {"skipped_layers", r.skipped_layers},
            {"failures", failures_json(r.failures)}};
}

std::string format_summary(const std::map<std::string, SummaryStat>& summary) {
    std::ostringstream out;
    for (const auto& [k, v] : summary) {
        char buf[128];
        std::snprintf(buf, sizeof buf, "%-18s %.4g (%.2g)\n", k.c_str(), v.mean, v.std);
        out << buf;
    }
    return out.str();
}

void write_report(const Report& r, const RunConfig& cfg) {
    if (cfg.output_dir.empty()) return;
    std::filesystem::create_directories(cfg.output_dir);
    write_text(cfg.output_dir / "report.csv", layers_csv(r, cfg.Ks));
    write_text(cfg.output_dir / "spectrum.csv", spectrum_csv(r));
    if (!r.heads.empty()) write_text(cfg.output_dir / "heads.csv", heads_csv(r));
    if (cfg.write_json) write_text(cfg.output_dir / "report.json", to_json(r, cfg.Ks).dump(2) + "\n");
}

void write_ood_report(const OodReport& r, const RunConfig& cfg) {
    if (cfg.output_dir.empty()) return;
    std::filesystem::create_directories(cfg.output_dir);
    write_text(cfg.output_dir / "ood_report.csv", ood_csv(r));
    if (cfg.write_json) write_text(cfg.output_dir / "ood_report.json", to_json(r).dump(2) + "\n");
}

}  // namespace geomlens::report
