// geomlens command-line front end.

#include "geomlens/attention_analysis.hpp"
#include "geomlens/decompose.hpp"
#include "geomlens/errors.hpp"
#include "geomlens/fourier.hpp"
#include "geomlens/geometry_metrics.hpp"
#include "geomlens/kernel_factorization.hpp"
#include "geomlens/numeric.hpp"
#include "geomlens/report.hpp"
#include "geomlens/spectral.hpp"
#include "geomlens/synthetic.hpp"
#include "geomlens/tensor_io.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace geomlens;
using io::json;

namespace {

struct Globals {
    int threads = 1;
    std::uint64_t seed = 0;
    std::string precision = "f32";
};

io::DType out_dtype(const Globals& g) { return io::parse_dtype(g.precision); }

void write_json_file(const fs::path& p, const json& j) {
    if (p.empty()) return;
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream out(p);
    if (!out) throw IoError("cannot open '" + p.string() + "' for writing");
    out << j.dump(2) << '\n';
}

void write_matrix(const fs::path& p, const Matrix& m, io::DType dt, const json& extra = json::object()) {
    io::write_container(io::matrix_to_container(m, "generic", dt, extra), p);
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

EmbeddingTensor load(const fs::path& p, bool drop_first) {
    EmbeddingTensor e = io::read_embedding(p);
    e.validate();
    if (drop_first && !e.dropped_first_token) {
        ArtifactOptions o;
        o.drop_first_token = true;
        e = *drop_artifacts(std::move(e), o);
    }
    return e;
}

std::vector<int> parse_ks(const std::string& s) {
    std::vector<int> ks;
    std::size_t at = 0;
    while (at <= s.size()) {
        const auto comma = s.find(',', at);
        const auto tok = s.substr(at, comma == std::string::npos ? std::string::npos : comma - at);
        if (!tok.empty()) {
            try {
                ks.push_back(std::stoi(tok));
            } catch (const std::exception&) {
                throw InvalidInput("bad K list entry '" + tok + "'");
            }
        }
        if (comma == std::string::npos) break;
        at = comma + 1;
    }
    if (ks.empty()) throw InvalidInput("empty K list");
    return ks;
}

spectral::RankMethod parse_rank_method(const std::string& s) {
    if (s == "gap") return spectral::RankMethod::gap;
    if (s == "energy") return spectral::RankMethod::energy;
    throw InvalidInput("rank method must be gap or energy");
}

// ---- report / ood-report -------------------------------------------------

struct ReportArgs {
    std::vector<std::string> inputs;
    std::vector<std::string> heads;  // "wq.gt:wk.gt"
    std::string out;
    std::string ks = "1,3,5,10";
    bool json = false;
    bool keep_first = false;
    bool keep_final = false;
    bool exclude_layer0 = false;
    int final_layer = -1;
    std::string rank_method = "gap";
};

void add_report_options(CLI::App* sub, ReportArgs& a, bool with_heads) {
    sub->add_option("--in,inputs", a.inputs, "Embedding containers, one per layer")->required();
    sub->add_option("--out", a.out, "Output directory");
    sub->add_flag("--json", a.json, "Also write a JSON mirror");
    sub->add_flag("--keep-first-token", a.keep_first, "Do not drop position 1");
    sub->add_flag("--keep-final-layer", a.keep_final, "Analyze the final layer too");
    sub->add_flag("--exclude-layer0", a.exclude_layer0, "Skip layer 0");
    sub->add_option("--final-layer", a.final_layer, "Index of the model's final layer");
    if (with_heads) {
        sub->add_option("--K", a.ks, "Comma-separated K list for r_K");
        sub->add_option("--head", a.heads, "Head weights as WQ:WK (repeatable)");
    } else {
        sub->add_option("--rank-method", a.rank_method, "gap or energy");
    }
}

report::RunConfig make_config(const ReportArgs& a, const Globals& g) {
    report::RunConfig cfg;
    for (const auto& s : a.inputs) cfg.embeddings.emplace_back(s);
    for (const auto& h : a.heads) {
        const auto colon = h.find(':');
        if (colon == std::string::npos) throw InvalidInput("--head expects WQ:WK");
        cfg.heads.push_back({h.substr(0, colon), h.substr(colon + 1)});
    }
    cfg.drop_first_token = !a.keep_first;
    cfg.skip_final_layer = !a.keep_final;
    cfg.include_layer0 = !a.exclude_layer0;
    if (a.final_layer >= 0) cfg.final_layer = a.final_layer;
    cfg.Ks = parse_ks(a.ks);
    cfg.ood_rank_method = parse_rank_method(a.rank_method);
    cfg.threads = g.threads;
    cfg.seed = g.seed;
    cfg.output_dir = a.out;
    cfg.write_json = a.json;
    return cfg;
}

void print_failures(const std::vector<report::Failure>& f) {
    for (const auto& x : f) std::cerr << "failed: " << x.input << ": " << x.message << '\n';
}

int cmd_report(const ReportArgs& a, const Globals& g) {
    const auto cfg = make_config(a, g);
    const auto rep = report::run_report(cfg);
    report::write_report(rep, cfg);
    if (cfg.output_dir.empty()) std::cout << report::layers_csv(rep, cfg.Ks);
    else std::cout << report::format_summary(rep.summary);
    print_failures(rep.failures);
    return rep.exit_code();
}

int cmd_ood(const ReportArgs& a, const Globals& g) {
    const auto cfg = make_config(a, g);
    const auto rep = report::run_ood_report(cfg);
    report::write_ood_report(rep, cfg);
    std::cout << report::ood_csv(rep);
    print_failures(rep.failures);
    return rep.exit_code();
}

// ---- single-layer commands -----------------------------------------------

struct DecomposeArgs {
    std::string in, out;
    bool drop_first = false;
};

int cmd_decompose(const DecomposeArgs& a, const Globals& g) {
    const auto e = load(a.in, a.drop_first);
    const auto dec = decompose(e);
    json side = {{"source", a.in}, {"layer", e.layer}, {"dropped_first_token", e.dropped_first_token}};
    write_decomposition(dec, a.out, out_dtype(g), side);
    std::cout << "C=" << e.num_sequences() << " T=" << e.num_positions() << " d=" << e.dim() << " -> " << a.out
              << '\n';
    return 0;
}

// A rank-2 container is taken as the positional basis P itself; a rank-3
// container is decomposed first.
Matrix load_positional(const fs::path& p, bool drop_first) {
    const json h = io::read_header(p);
    if (h.contains("shape") && h["shape"].is_array() && h["shape"].size() == 2) return io::read_matrix(p);
    return decompose_means(load(p, drop_first)).pos;
}

void write_csv(const fs::path& p, const std::string& text) {
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream out(p);
    if (!out) throw IoError("cannot open '" + p.string() + "' for writing");
    out << text;
}

struct FourierArgs {
    std::string in, out, gram_dir, ks = "1,3,5,10";
    int m = 2;
    bool drop_first = true;
};

int cmd_fourier(const FourierArgs& a, const Globals& g) {
    const auto basis = PositionalBasis::from_rows(load_positional(a.in, a.drop_first));
    const auto gb = fourier::gram(basis);
    const auto freq = fourier::dct2(gb.G, parse_ks(a.ks));
    std::ostringstream csv;
    csv << "K,r_K\n";
    for (const auto& [K, r] : freq.ratios) {
        csv << K << ',' << fmt(r) << '\n';
        std::cout << "r_" << K << " = " << fmt(r) << '\n';
    }
    for (int m = 1; m <= a.m; ++m) {
        const auto fd = fourier::finite_difference(gb.G_ext, m);
        std::cout << "||Delta^(" << m << "," << m << ")||_max = " << fmt(fd.max_norm) << '\n';
    }
    if (!gb.excluded_rows.empty()) std::cerr << "warning: " << gb.excluded_rows.size() << " zero positional rows excluded\n";
    if (!a.out.empty()) write_csv(a.out, csv.str());
    if (!a.gram_dir.empty()) {
        fs::create_directories(a.gram_dir);
        write_matrix(fs::path(a.gram_dir) / "gram.gt", gb.G, out_dtype(g));
        write_matrix(fs::path(a.gram_dir) / "gram_dct.gt", freq.G_hat, out_dtype(g));
    }
    return 0;
}

struct QkArgs {
    std::string in, wq, wk, out, mu_mode = "exclude";
    std::size_t seq = 0;
    bool causal = false;
    bool drop_first = true;
};

int cmd_qk(const QkArgs& a, const Globals& g) {
    const auto e = load(a.in, a.drop_first);
    const auto w = io::read_attention_weights(a.wq, a.wk);
    if (a.seq >= e.num_sequences()) throw InvalidInput("sequence index out of range");
    const auto q = attention::qk_decompose(e, w, a.seq, attention::parse_mu_mode(a.mu_mode));
    const Matrix attn = attention::attention_matrix(q.full, a.causal);
    const double additivity = numeric::max_abs(q.pp + q.pc + q.cp + q.cc - q.full);
    std::cout << "additivity max error = " << fmt(additivity) << '\n';
    const std::pair<const char*, const Matrix*> parts[] = {
        {"full", &q.full}, {"pp", &q.pp}, {"pc", &q.pc}, {"cp", &q.cp}, {"cc", &q.cc}, {"attn", &attn}};
    json j = {{"layer", w.layer}, {"head", w.head}, {"seq", a.seq}, {"mu_mode", a.mu_mode},
              {"causal", a.causal}, {"additivity_error", additivity}};
    for (const auto& [name, m] : parts) {
        if (m == &attn) continue;
        const double ratio = attention::argmax_locality_ratio(*m, true);
        j["argmax_locality_" + std::string(name)] = ratio;
        std::cout << "argmax locality " << name << " = " << fmt(ratio) << '\n';
    }
    if (!a.out.empty()) {
        const fs::path o(a.out);
        fs::create_directories(o);
        for (const auto& [name, m] : parts) write_matrix(o / (std::string(name) + ".gt"), *m, out_dtype(g));
        std::ostringstream csv;
        csv << "t,t_prime,full,pp,pc,cp,cc,attn\n";
        for (Eigen::Index t = 0; t < q.full.rows(); ++t)
            for (Eigen::Index u = 0; u < q.full.cols(); ++u) {
                csv << t + 1 << ',' << u + 1;
                for (const auto& [name, m] : parts) csv << ',' << fmt((*m)(t, u));
                csv << '\n';
            }
        write_csv(o / "heatmap.csv", csv.str());
        write_json_file(o / "qk.json", j);
    }
    return 0;
}

struct WeightsArgs {
    std::string p, wq, wk, w_dir, out;
    int K = attention::kDefaultK;
    double quantile = attention::kDefaultQuantile;
    bool drop_first = true;
};

// Pairs "<stem>wq<rest>" with "<stem>wk<rest>" inside a directory.
std::vector<std::pair<fs::path, fs::path>> find_head_pairs(const fs::path& dir) {
    std::vector<std::pair<fs::path, fs::path>> pairs;
    if (!fs::is_directory(dir)) throw InvalidInput("not a directory: " + dir.string());
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir))
        if (entry.is_regular_file() && entry.path().extension() == ".gt") files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
        const std::string name = f.filename().string();
        const auto at = name.find("wq");
        if (at == std::string::npos) continue;
        std::string partner = name;
        partner.replace(at, 2, "wk");
        const fs::path k = dir / partner;
        if (!fs::exists(k)) throw InvalidInput("no key weights for " + f.string());
        pairs.emplace_back(f, k);
    }
    if (pairs.empty()) throw InvalidInput("no *wq*.gt files in " + dir.string());
    return pairs;
}

int cmd_weights(const WeightsArgs& a, const Globals& g) {
    const Matrix P = load_positional(a.p, a.drop_first);
    std::vector<std::pair<fs::path, fs::path>> pairs;
    if (!a.w_dir.empty()) pairs = find_head_pairs(a.w_dir);
    if (!a.wq.empty() || !a.wk.empty()) {
        if (a.wq.empty() || a.wk.empty()) throw InvalidInput("--wq and --wk go together");
        pairs.emplace_back(a.wq, a.wk);
    }
    if (pairs.empty()) throw InvalidInput("give --w-dir or --wq/--wk");
    std::ostringstream csv;
    csv << "layer,head,K,threshold,energy_fraction,warning\n";
    for (const auto& [q, k] : pairs) {
        const auto w = io::read_attention_weights(q, k);
        const auto dis = attention::dissect_weights(w, P, a.K, a.quantile);
        csv << w.layer << ',' << w.head << ',' << dis.K << ',' << fmt(dis.threshold) << ','
            << fmt(dis.energy_fraction) << ',' << dis.warning << '\n';
        if (!dis.warning.empty()) std::cerr << "warning: " << q.string() << ": " << dis.warning << '\n';
        if (pairs.size() == 1 && fs::path(a.out).extension() != ".csv" && !a.out.empty()) {
            const fs::path o(a.out);
            fs::create_directories(o);
            write_matrix(o / "diag.gt", Matrix(dis.D), out_dtype(g));
            write_matrix(o / "rotated.gt", dis.rotated, out_dtype(g));
            write_matrix(o / "denoised.gt", dis.denoised, out_dtype(g));
            write_matrix(o / "low_freq_block.gt", dis.L, out_dtype(g));
        }
    }
    if (!a.out.empty() && fs::path(a.out).extension() == ".csv") write_csv(a.out, csv.str());
    else if (!a.out.empty() && pairs.size() == 1) write_csv(fs::path(a.out) / "weights.csv", csv.str());
    else std::cout << csv.str();
    return 0;
}

struct PcaArgs {
    std::string in, out;
    int components = 2;
    int samples = 1000;
    bool drop_first = true;
};

int cmd_pca(const PcaArgs& a, const Globals& g) {
    const auto e = load(a.in, a.drop_first);
    const auto dec = decompose(e);
    const auto C = dec.num_sequences();
    const auto T = dec.num_positions();
    const auto total = C * T;
    const auto n = std::min<std::size_t>(total, static_cast<std::size_t>(std::max(0, a.samples)));
    numeric::Rng rng(numeric::derive_seed(g.seed, 0));
    std::vector<std::size_t> idx(total);
    for (std::size_t i = 0; i < total; ++i) idx[i] = i;
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(n);
    std::sort(idx.begin(), idx.end());
    Matrix samples(static_cast<Eigen::Index>(n), dec.pos.cols());
    for (std::size_t i = 0; i < n; ++i)
        samples.row(static_cast<Eigen::Index>(i)) = dec.cvec(idx[i] / T, idx[i] % T).transpose();
    const auto p = geometry::pca_projection(dec.pos, samples, a.components);
    if (!p.warning.empty()) std::cerr << "warning: " << p.warning << '\n';

    std::ostringstream csv;
    csv << "kind,index";
    if (a.components == 2) {
        csv << ",x,y";
    } else {
        for (int i = 1; i <= a.components; ++i) csv << ",pc" << i;
    }
    csv << '\n';
    auto rows = [&](const char* kind, const Matrix& m, auto index_of) {
        for (Eigen::Index r = 0; r < m.rows(); ++r) {
            csv << kind << ',' << index_of(r);
            for (Eigen::Index c = 0; c < m.cols(); ++c) csv << ',' << fmt(m(r, c));
            csv << '\n';
        }
    };
    rows("pos", p.pos_coords, [](Eigen::Index r) { return std::to_string(r + 1); });
    rows("cvec", p.cvec_coords, [&](Eigen::Index r) {
        const auto i = idx[static_cast<std::size_t>(r)];
        return std::to_string(i / T) + ":" + std::to_string(i % T + 1);
    });
    if (a.out.empty()) std::cout << csv.str();
    else write_csv(a.out, csv.str());
    (void)g;
    return 0;
}

// CLI defaults give every part of the decomposition some signal.
synthetic::PlantedSpec cli_synth_defaults() {
    synthetic::PlantedSpec s;
    s.n_clusters = 4;
    s.cluster_spread = 0.1;
    s.noise_sigma = 0.1;
    return s;
}

struct SynthArgs {
    synthetic::PlantedSpec spec = cli_synth_defaults();
    bool no_orth = false;
    int layers = 1;
    std::string out;
    bool no_truth = false;
};

int cmd_synth(SynthArgs a, const Globals& g) {
    a.spec.orthogonalize_clusters = !a.no_orth;
    if (a.layers < 1) throw InvalidInput("--layers must be >= 1");
    const fs::path out(a.out);
    if (out.has_parent_path()) fs::create_directories(out.parent_path());
    for (int l = 0; l < a.layers; ++l) {
        auto spec = a.spec;
        spec.seed = a.layers == 1 ? a.spec.seed : numeric::derive_seed(a.spec.seed, static_cast<std::uint64_t>(l));
        auto data = synthetic::generate(spec);
        data.tensor.layer = l;
        fs::path target = out;
        if (a.layers > 1) {
            char suffix[32];
            std::snprintf(suffix, sizeof suffix, "_L%02d", l);
            target = out.parent_path() / (out.stem().string() + suffix + out.extension().string());
        }
        io::write_container(io::embedding_to_container(data.tensor, out_dtype(g)), target);
        if (!a.no_truth) {
            json side = {{"seed", spec.seed}, {"noise_sigma", spec.noise_sigma}, {"rank", spec.rank},
                         {"n_clusters", spec.n_clusters}, {"layer", l}};
            write_decomposition(data.truth, fs::path(target.string() + ".truth"), out_dtype(g), side);
        }
        std::cout << target.string() << '\n';
    }
    return 0;
}

struct Thm1Args {
    std::string in, json_out, scaling = "exact";
    int T = 128, r = 4, k = 8, m = 1, trials = 1, d = 64;
    bool no_recenter = false;
    bool drop_first = true;
};

int cmd_thm1(const Thm1Args& a, const Globals& g) {
    fourier::Thm1Options opts;
    opts.recenter = !a.no_recenter;
    if (a.scaling == "exact") opts.scaling = fourier::BScaling::exact;
    else if (a.scaling == "literal") opts.scaling = fourier::BScaling::literal;
    else throw InvalidInput("--scaling must be exact or literal");

    json trials = json::array();
    int holds = 0, n = 0;
    auto record = [&](const fourier::Thm1Certificate& c) {
        ++n;
        if (c.holds) ++holds;
        trials.push_back({{"k", c.k}, {"m", c.m}, {"lhs", c.lhs}, {"rhs", c.rhs}, {"delta_max", c.delta_max},
                          {"holds", c.holds}, {"recentered", c.recentered}, {"min_eigenvalue", c.min_eigenvalue}});
    };
    if (!a.in.empty()) {
        const auto basis = PositionalBasis::from_rows(load_positional(a.in, a.drop_first));
        record(fourier::thm1_verify(basis.normalized, a.k, a.m, opts));
    } else {
        for (int i = 0; i < a.trials; ++i) {
            const Matrix P = synthetic::smooth_curve_basis(a.T, a.r, numeric::derive_seed(g.seed, static_cast<std::uint64_t>(i)), a.d);
            record(fourier::thm1_verify(P, a.k, a.m, opts));
        }
    }
    double max_lhs = 0.0;
    for (const auto& t : trials) max_lhs = std::max(max_lhs, t["lhs"].get<double>());
    std::cout << "holds " << holds << "/" << n << ", max lhs = " << fmt(max_lhs) << '\n';
    write_json_file(a.json_out, {{"k", a.k}, {"m", a.m}, {"holds", holds}, {"trials", trials}});
    return holds == n ? 0 : 3;
}

struct Thm2Args {
    kernel::Thm2TrialConfig cfg;
    std::optional<double> incoh;
    std::optional<double> gamma;
    std::string noise = "off";
    std::string json_out;
};

int cmd_thm2(Thm2Args a, const Globals& g) {
    if (a.noise == "on") a.cfg.noise = true;
    else if (a.noise == "off") a.cfg.noise = false;
    else throw InvalidInput("--noise must be on or off");
    if (a.incoh && a.gamma) throw InvalidInput("give either --incoh or --gamma, not both");
    if (a.gamma) a.cfg.incoh = kernel::incoh_from_gamma(a.cfg.d, *a.gamma);
    else if (a.incoh) a.cfg.incoh = *a.incoh;
    (void)g;
    const auto sum = kernel::run_thm2_trials(a.cfg);
    std::cout << "holds " << sum.holds << "/" << sum.trials << ", max gap = " << fmt(sum.max_gap)
              << ", max gap/bound = " << fmt(sum.max_gap_over_bound) << ", incoh = " << fmt(sum.max_incoh) << '\n';
    json trials = json::array();
    for (const auto& r : sum.results)
        trials.push_back({{"log_lhs", r.log_lhs}, {"log_rhs_sum", r.log_rhs_sum}, {"gap", r.gap}, {"bound", r.bound},
                          {"holds", r.holds}});
    write_json_file(a.json_out, {{"d", a.cfg.d}, {"s", a.cfg.s}, {"incoh", sum.max_incoh}, {"noise", a.cfg.noise},
                                 {"seed", a.cfg.seed}, {"holds", sum.holds}, {"trials", trials}});
    return sum.holds == sum.trials ? 0 : 3;
}

struct CrossArgs {
    std::vector<std::string> inputs;
    std::string out;
};

int cmd_cross(const CrossArgs& a, const Globals&) {
    std::vector<EmbeddingTensor> layers;
    for (const auto& p : a.inputs) layers.push_back(load(p, false));
    const auto st = cross_layer_stats(layers);
    std::ostringstream csv;
    csv << "layer,mean_norm";
    for (const auto& e : layers) csv << ",cos_L" << e.layer;
    csv << '\n';
    for (std::size_t i = 0; i < layers.size(); ++i) {
        csv << layers[i].layer << ',' << fmt(st.mean_norm[i]);
        for (std::size_t j = 0; j < layers.size(); ++j)
            csv << ',' << fmt(st.cosine(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
        csv << '\n';
    }
    if (a.out.empty()) {
        std::cout << csv.str();
    } else {
        std::ofstream out(a.out);
        if (!out) throw IoError("cannot open '" + a.out + "' for writing");
        out << csv.str();
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"geomlens: geometry of transformer hidden states"};
    app.require_subcommand(1);
    Globals g;
    app.add_option("--threads", g.threads, "Worker threads")->check(CLI::PositiveNumber);
    app.add_option("--seed", g.seed, "Master seed");
    app.add_option("--precision", g.precision, "Output container precision")->check(CLI::IsMember({"f32", "f64"}));

    std::function<int()> action;

    DecomposeArgs dec;
    auto* s_dec = app.add_subcommand("decompose", "Write mu/pos/ctx/resid of one layer");
    s_dec->add_option("--in", dec.in)->required();
    s_dec->add_option("--out", dec.out)->required();
    s_dec->add_flag("--drop-first-token", dec.drop_first);
    s_dec->callback([&] { action = [&] { return cmd_decompose(dec, g); }; });

    ReportArgs rep;
    auto* s_rep = app.add_subcommand("report", "Per-layer geometry report");
    add_report_options(s_rep, rep, true);
    s_rep->callback([&] { action = [&] { return cmd_report(rep, g); }; });

    ReportArgs ood;
    auto* s_ood = app.add_subcommand("ood-report", "Rank estimate and r_10 per layer");
    add_report_options(s_ood, ood, false);
    s_ood->callback([&] { action = [&] { return cmd_ood(ood, g); }; });

    FourierArgs fo;
    auto* s_fo = app.add_subcommand("fourier", "Gram matrix, DCT ratios and finite differences");
    s_fo->add_option("--in", fo.in)->required();
    s_fo->add_option("--out", fo.out, "CSV of K, r_K");
    s_fo->add_option("--gram-dir", fo.gram_dir, "Directory for G and its DCT as containers");
    s_fo->add_option("--K", fo.ks);
    s_fo->add_option("--m", fo.m)->check(CLI::PositiveNumber);
    s_fo->add_flag("!--keep-first-token", fo.drop_first);
    s_fo->callback([&] { action = [&] { return cmd_fourier(fo, g); }; });

    QkArgs qk;
    auto* s_qk = app.add_subcommand("qk", "QK matrix and its four constituents");
    s_qk->add_option("--emb,--in", qk.in)->required();
    s_qk->add_option("--wq", qk.wq)->required();
    s_qk->add_option("--wk", qk.wk)->required();
    s_qk->add_option("--seq", qk.seq);
    s_qk->add_flag("--causal", qk.causal, "Causal mask for the attention matrix");
    s_qk->add_option("--mu-mode", qk.mu_mode)->check(CLI::IsMember({"exclude", "fold_into_pos"}));
    s_qk->add_option("--out", qk.out);
    s_qk->add_flag("!--keep-first-token", qk.drop_first);
    s_qk->callback([&] { action = [&] { return cmd_qk(qk, g); }; });

    WeightsArgs wa;
    auto* s_w = app.add_subcommand("weights", "Dissect W = Wq Wk^T / sqrt(d_head) against the positional basis");
    s_w->add_option("--p,--in", wa.p, "Positional basis P, or embeddings of the same layer")->required();
    s_w->add_option("--w-dir", wa.w_dir, "Directory of *wq*.gt / *wk*.gt pairs");
    s_w->add_option("--wq", wa.wq);
    s_w->add_option("--wk", wa.wk);
    s_w->add_option("--K", wa.K);
    s_w->add_option("--quantile", wa.quantile);
    s_w->add_option("--out", wa.out);
    s_w->add_flag("!--keep-first-token", wa.drop_first);
    s_w->callback([&] { action = [&] { return cmd_weights(wa, g); }; });

    PcaArgs pa;
    auto* s_pca = app.add_subcommand("pca", "Project pos and sampled cvec onto the top PCA axes of P");
    s_pca->add_option("--in", pa.in)->required();
    s_pca->add_option("--out", pa.out);
    s_pca->add_option("--components", pa.components);
    s_pca->add_option("--samples", pa.samples);
    s_pca->add_flag("!--keep-first-token", pa.drop_first);
    s_pca->callback([&] { action = [&] { return cmd_pca(pa, g); }; });

    SynthArgs sy;
    auto* s_sy = app.add_subcommand("synth", "Generate planted embeddings with ground truth");
    s_sy->add_option("--C", sy.spec.C);
    s_sy->add_option("--T", sy.spec.T);
    s_sy->add_option("--d", sy.spec.d);
    s_sy->add_option("--rank", sy.spec.rank);
    s_sy->add_option("--clusters", sy.spec.n_clusters)->capture_default_str();
    s_sy->add_option("--sigma", sy.spec.noise_sigma)->capture_default_str();
    s_sy->add_option("--spread", sy.spec.cluster_spread)->capture_default_str();
    s_sy->add_option("--radius", sy.spec.cluster_radius);
    s_sy->add_option("--mu-scale", sy.spec.mu_scale);
    s_sy->add_option("--seed", sy.spec.seed);
    s_sy->add_flag("--no-orthogonalize", sy.no_orth);
    s_sy->add_option("--layers", sy.layers);
    s_sy->add_flag("--no-truth", sy.no_truth);
    s_sy->add_option("--out", sy.out)->required();
    s_sy->callback([&] { action = [&] { return cmd_synth(sy, g); }; });

    auto* s_ver = app.add_subcommand("verify", "Constructive bound checks");
    s_ver->require_subcommand(1);

    Thm1Args t1;
    auto* s_t1 = s_ver->add_subcommand("thm1", "Low-frequency approximation certificate");
    s_t1->add_option("--in", t1.in, "Embeddings (omit for planted smooth bases)");
    s_t1->add_option("--T", t1.T);
    s_t1->add_option("--r", t1.r);
    s_t1->add_option("--d", t1.d);
    s_t1->add_option("--k", t1.k);
    s_t1->add_option("--m", t1.m);
    s_t1->add_option("--trials", t1.trials);
    s_t1->add_option("--scaling", t1.scaling);
    s_t1->add_flag("--no-recenter", t1.no_recenter);
    s_t1->add_option("--json", t1.json_out);
    s_t1->callback([&] { action = [&] { return cmd_thm1(t1, g); }; });

    Thm2Args t2;
    auto* s_t2 = s_ver->add_subcommand("thm2", "Kernel factorization bound");
    s_t2->add_option("--d", t2.cfg.d);
    s_t2->add_option("--s", t2.cfg.s);
    s_t2->add_option("--n1", t2.cfg.n1);
    s_t2->add_option("--n2", t2.cfg.n2);
    s_t2->add_option("--incoh", t2.incoh);
    s_t2->add_option("--gamma", t2.gamma);
    s_t2->add_option("--trials", t2.cfg.trials);
    s_t2->add_option("--noise", t2.noise);
    s_t2->add_option("--seed", t2.cfg.seed);
    s_t2->add_option("--bound-constant", t2.cfg.options.bound_constant);
    s_t2->add_option("--noise-constant", t2.cfg.options.noise_constant);
    s_t2->add_option("--json", t2.json_out);
    s_t2->callback([&] { action = [&] { return cmd_thm2(t2, g); }; });

    CrossArgs cr;
    auto* s_cr = app.add_subcommand("cross-layer", "Cosine similarity of matching tokens across layers");
    s_cr->add_option("--in,inputs", cr.inputs)->required();
    s_cr->add_option("--out", cr.out);
    s_cr->callback([&] { action = [&] { return cmd_cross(cr, g); }; });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }
    if (!action) return 2;
    try {
        return action();
    } catch (const std::exception& ex) {
        std::cerr << "error: " << ex.what() << '\n';
        return report::exit_code_for(ex);
    }
}
