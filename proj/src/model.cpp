#include "dbc/model.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include <json.hpp>

namespace dbc {

namespace {

constexpr double kLnEps = 1e-5;
constexpr double kNormFloor = 1e-12;
constexpr double kNormClamp = 1e-8;
constexpr char kCheckpointMagic[8] = {'D', 'B', 'C', 'K', 'P', 'T', '0', '1'};

Eigen::MatrixXd layernorm(const Eigen::MatrixXd& x, const Eigen::MatrixXd& gain,
                          const Eigen::MatrixXd& bias, LnCache& cache) {
    const Eigen::Index rows = x.rows();
    const Eigen::Index cols = x.cols();
    cache.xhat.resize(rows, cols);
    cache.rstd.resize(rows);
    Eigen::MatrixXd out(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        const double mean = x.row(i).mean();
        const double var = (x.row(i).array() - mean).square().mean();
        const double rstd = 1.0 / std::sqrt(var + kLnEps);
        cache.rstd(i) = rstd;
        cache.xhat.row(i) = (x.row(i).array() - mean) * rstd;
        out.row(i) = cache.xhat.row(i).cwiseProduct(gain.col(0).transpose()) +
                     bias.col(0).transpose();
    }
    return out;
}

// Accumulates dx into d_x and parameter grads into d_gain / d_bias.
void layernorm_backward(const Eigen::MatrixXd& d_out, const LnCache& cache,
                        const Eigen::MatrixXd& gain, Eigen::MatrixXd& d_x,
                        Eigen::MatrixXd& d_gain, Eigen::MatrixXd& d_bias) {
    const Eigen::Index rows = d_out.rows();
    const Eigen::Index cols = d_out.cols();
    for (Eigen::Index i = 0; i < rows; ++i) {
        const auto dy = d_out.row(i);
        d_gain.col(0).transpose() += dy.cwiseProduct(cache.xhat.row(i));
        d_bias.col(0).transpose() += dy;
        const Eigen::RowVectorXd dxhat = dy.cwiseProduct(gain.col(0).transpose());
        const double mean_dxhat = dxhat.mean();
        const double mean_dxhat_xhat = dxhat.cwiseProduct(cache.xhat.row(i)).mean();
        d_x.row(i) += cache.rstd(i) *
                      (dxhat.array() - mean_dxhat -
                       cache.xhat.row(i).array() * mean_dxhat_xhat)
                          .matrix();
        (void)cols;
    }
}

void softmax_rows_causal(Eigen::MatrixXd& scores) {
    const Eigen::Index n = scores.rows();
    for (Eigen::Index i = 0; i < n; ++i) {
        double mx = scores(i, 0);
        for (Eigen::Index j = 1; j <= i; ++j) mx = std::max(mx, scores(i, j));
        double sum = 0.0;
        for (Eigen::Index j = 0; j <= i; ++j) {
            scores(i, j) = std::exp(scores(i, j) - mx);
            sum += scores(i, j);
        }
        for (Eigen::Index j = 0; j <= i; ++j) scores(i, j) /= sum;
        for (Eigen::Index j = i + 1; j < n; ++j) scores(i, j) = 0.0;
    }
}

}  // namespace

std::string precision_name(Precision p) {
    return p == Precision::full ? "full" : "reduced";
}

Precision precision_from_name(const std::string& name) {
    if (name == "full") return Precision::full;
    if (name == "reduced") return Precision::reduced;
    throw ValidationError("unknown precision '" + name + "' (expected full|reduced)");
}

void ModelConfig::validate() const {
    if (vocab_size < 1) throw ValidationError("ModelConfig: vocab_size must be >= 1");
    if (d_model < 1) throw ValidationError("ModelConfig: d_model must be >= 1");
    if (n_layers < 1) throw ValidationError("ModelConfig: n_layers must be >= 1");
    if (n_heads < 1) throw ValidationError("ModelConfig: n_heads must be >= 1");
    if (d_model % n_heads != 0) {
        throw ValidationError("ModelConfig: d_model (" + std::to_string(d_model) +
                              ") must be divisible by n_heads (" + std::to_string(n_heads) + ")");
    }
    if (max_length < 1) throw ValidationError("ModelConfig: max_length must be >= 1");
    if (proj_hidden < 1) throw ValidationError("ModelConfig: proj_hidden must be >= 1");
    if (proj_out < 2) throw ValidationError("ModelConfig: proj_out must be >= 2");
}

std::vector<std::pair<std::string, Eigen::MatrixXd*>> parameter_list(Parameters& params) {
    std::vector<std::pair<std::string, Eigen::MatrixXd*>> list;
    list.emplace_back("tok_emb", &params.tok_emb);
    list.emplace_back("pos_emb", &params.pos_emb);
    for (std::size_t l = 0; l < params.layers.size(); ++l) {
        LayerParams& lp = params.layers[l];
        const std::string p = "layers." + std::to_string(l) + ".";
        list.emplace_back(p + "ln1_g", &lp.ln1_g);
        list.emplace_back(p + "ln1_b", &lp.ln1_b);
        list.emplace_back(p + "wq", &lp.wq);
        list.emplace_back(p + "bq", &lp.bq);
        list.emplace_back(p + "wk", &lp.wk);
        list.emplace_back(p + "bk", &lp.bk);
        list.emplace_back(p + "wv", &lp.wv);
        list.emplace_back(p + "bv", &lp.bv);
        list.emplace_back(p + "wo", &lp.wo);
        list.emplace_back(p + "bo", &lp.bo);
        list.emplace_back(p + "ln2_g", &lp.ln2_g);
        list.emplace_back(p + "ln2_b", &lp.ln2_b);
        list.emplace_back(p + "w_fc", &lp.w_fc);
        list.emplace_back(p + "b_fc", &lp.b_fc);
        list.emplace_back(p + "w_proj", &lp.w_proj);
        list.emplace_back(p + "b_proj", &lp.b_proj);
    }
    list.emplace_back("ln_f_g", &params.ln_f_g);
    list.emplace_back("ln_f_b", &params.ln_f_b);
    list.emplace_back("w_out", &params.w_out);
    list.emplace_back("head.w1", &params.head.w1);
    list.emplace_back("head.b1", &params.head.b1);
    list.emplace_back("head.w2", &params.head.w2);
    list.emplace_back("head.b2", &params.head.b2);
    return list;
}

std::vector<std::pair<std::string, const Eigen::MatrixXd*>> parameter_list(
    const Parameters& params) {
    std::vector<std::pair<std::string, const Eigen::MatrixXd*>> out;
    for (auto& [name, mat] : parameter_list(const_cast<Parameters&>(params))) {
        out.emplace_back(name, mat);
    }
    return out;
}

namespace {

Parameters make_empty(const ModelConfig& config) {
    config.validate();
    Parameters p;
    p.config = config;
    const int d = config.d_model;
    p.tok_emb.setZero(config.vocab_size, d);
    p.pos_emb.setZero(config.max_length, d);
    p.layers.resize(static_cast<std::size_t>(config.n_layers));
    for (LayerParams& lp : p.layers) {
        lp.ln1_g.setZero(d, 1);
        lp.ln1_b.setZero(d, 1);
        lp.wq.setZero(d, d);
        lp.bq.setZero(d, 1);
        lp.wk.setZero(d, d);
        lp.bk.setZero(d, 1);
        lp.wv.setZero(d, d);
        lp.bv.setZero(d, 1);
        lp.wo.setZero(d, d);
        lp.bo.setZero(d, 1);
        lp.ln2_g.setZero(d, 1);
        lp.ln2_b.setZero(d, 1);
        lp.w_fc.setZero(d, 4 * d);
        lp.b_fc.setZero(4 * d, 1);
        lp.w_proj.setZero(4 * d, d);
        lp.b_proj.setZero(d, 1);
    }
    p.ln_f_g.setZero(d, 1);
    p.ln_f_b.setZero(d, 1);
    p.w_out.setZero(d, config.vocab_size);
    p.head.w1.setZero(d, config.proj_hidden);
    p.head.b1.setZero(config.proj_hidden, 1);
    p.head.w2.setZero(config.proj_hidden, config.proj_out);
    p.head.b2.setZero(config.proj_out, 1);
    return p;
}

}  // namespace

Parameters init_model(const ModelConfig& config) {
    Parameters p = make_empty(config);
    Rng rng(Rng::mix(config.seed, 0x6d6f64656cull));
    const double scale = 0.02;
    auto fill_normal = [&](Eigen::MatrixXd& mat) {
        for (Eigen::Index j = 0; j < mat.cols(); ++j) {
            for (Eigen::Index i = 0; i < mat.rows(); ++i) {
                mat(i, j) = scale * rng.normal();
            }
        }
    };
    fill_normal(p.tok_emb);
    fill_normal(p.pos_emb);
    for (LayerParams& lp : p.layers) {
        lp.ln1_g.setOnes();
        lp.ln2_g.setOnes();
        fill_normal(lp.wq);
        fill_normal(lp.wk);
        fill_normal(lp.wv);
        fill_normal(lp.wo);
        fill_normal(lp.w_fc);
        fill_normal(lp.w_proj);
        // biases stay zero
    }
    p.ln_f_g.setOnes();
    fill_normal(p.w_out);
    fill_normal(p.head.w1);
    fill_normal(p.head.w2);
    if (config.precision == Precision::reduced) round_to_reduced(p);
    return p;
}

Parameters zeros_like(const Parameters& params) {
    return make_empty(params.config);
}

void round_to_reduced(Parameters& params) {
    for (auto& [name, mat] : parameter_list(params)) {
        for (Eigen::Index j = 0; j < mat->cols(); ++j) {
            for (Eigen::Index i = 0; i < mat->rows(); ++i) {
                (*mat)(i, j) = static_cast<double>(static_cast<float>((*mat)(i, j)));
            }
        }
    }
}

double gelu(double x) {
    return 0.5 * x * (1.0 + std::erf(x * M_SQRT1_2));
}

double gelu_grad(double x) {
    const double cdf = 0.5 * (1.0 + std::erf(x * M_SQRT1_2));
    const double pdf = std::exp(-0.5 * x * x) * 0.3989422804014326779399461;
    return cdf + x * pdf;
}

ForwardOutput forward_cached(const Parameters& params, const std::vector<int>& tokens,
                             ForwardCache& cache) {
    const ModelConfig& cfg = params.config;
    const int L = static_cast<int>(tokens.size());
    if (L == 0) throw ValidationError("forward: empty token sequence");
    if (L > cfg.max_length) {
        throw ValidationError("forward: sequence length " + std::to_string(L) +
                              " exceeds max_length " + std::to_string(cfg.max_length));
    }
    for (int t : tokens) {
        if (t < 0 || t >= cfg.vocab_size) {
            throw ValidationError("forward: token id " + std::to_string(t) +
                                  " outside vocab of size " + std::to_string(cfg.vocab_size));
        }
    }

    cache.tokens = tokens;
    cache.layers.assign(static_cast<std::size_t>(cfg.n_layers), LayerCache{});

    const int d = cfg.d_model;
    const int nh = cfg.n_heads;
    const int dh = d / nh;
    const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(dh));

    Eigen::MatrixXd x(L, d);
    for (int i = 0; i < L; ++i) {
        x.row(i) = params.tok_emb.row(tokens[static_cast<std::size_t>(i)]) + params.pos_emb.row(i);
    }

    for (int l = 0; l < cfg.n_layers; ++l) {
        const LayerParams& lp = params.layers[static_cast<std::size_t>(l)];
        LayerCache& lc = cache.layers[static_cast<std::size_t>(l)];
        lc.x_in = x;

        const Eigen::MatrixXd n1 = layernorm(x, lp.ln1_g, lp.ln1_b, lc.ln1);
        lc.q = (n1 * lp.wq).rowwise() + lp.bq.col(0).transpose();
        lc.k = (n1 * lp.wk).rowwise() + lp.bk.col(0).transpose();
        lc.v = (n1 * lp.wv).rowwise() + lp.bv.col(0).transpose();

        lc.attn_probs.assign(static_cast<std::size_t>(nh), Eigen::MatrixXd());
        lc.attn_concat.resize(L, d);
        for (int h = 0; h < nh; ++h) {
            const auto qh = lc.q.middleCols(h * dh, dh);
            const auto kh = lc.k.middleCols(h * dh, dh);
            const auto vh = lc.v.middleCols(h * dh, dh);
            Eigen::MatrixXd scores = qh * kh.transpose() * inv_sqrt_dh;
            softmax_rows_causal(scores);
            lc.attn_probs[static_cast<std::size_t>(h)] = scores;
            lc.attn_concat.middleCols(h * dh, dh) = scores * vh;
        }
        const Eigen::MatrixXd attn_out =
            (lc.attn_concat * lp.wo).rowwise() + lp.bo.col(0).transpose();
        lc.x_mid = x + attn_out;

        const Eigen::MatrixXd n2 = layernorm(lc.x_mid, lp.ln2_g, lp.ln2_b, lc.ln2);
        lc.mlp_pre = (n2 * lp.w_fc).rowwise() + lp.b_fc.col(0).transpose();
        lc.mlp_act = lc.mlp_pre.unaryExpr([](double v) { return gelu(v); });
        const Eigen::MatrixXd mlp_out =
            (lc.mlp_act * lp.w_proj).rowwise() + lp.b_proj.col(0).transpose();
        x = lc.x_mid + mlp_out;
    }

    cache.x_last = x;
    cache.hidden = layernorm(x, params.ln_f_g, params.ln_f_b, cache.ln_f);

    ForwardOutput out;
    out.hidden = cache.hidden;
    out.logits = cache.hidden * params.w_out;
    if (cfg.precision == Precision::full && !out.logits.allFinite()) {
        throw Error("forward: non-finite logits under full precision");
    }
    return out;
}

ForwardOutput forward(const Parameters& params, const std::vector<int>& tokens) {
    ForwardCache cache;
    return forward_cached(params, tokens, cache);
}

void backward(const Parameters& params, const ForwardCache& cache,
              const Eigen::MatrixXd& d_logits, const Eigen::MatrixXd& d_hidden_extra,
              Parameters& grads) {
    const ModelConfig& cfg = params.config;
    const int L = static_cast<int>(cache.tokens.size());
    const int d = cfg.d_model;
    const int nh = cfg.n_heads;
    const int dh = d / nh;
    const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(dh));

    // Logits = hidden * w_out; extra hidden gradient joins from the
    // projection-head path.
    Eigen::MatrixXd d_hidden = Eigen::MatrixXd::Zero(L, d);
    if (d_logits.size() > 0) {
        grads.w_out += cache.hidden.transpose() * d_logits;
        d_hidden = d_logits * params.w_out.transpose();
    }
    if (d_hidden_extra.size() > 0) d_hidden += d_hidden_extra;

    Eigen::MatrixXd d_x = Eigen::MatrixXd::Zero(L, d);
    layernorm_backward(d_hidden, cache.ln_f, params.ln_f_g, d_x, grads.ln_f_g, grads.ln_f_b);

    for (int l = cfg.n_layers - 1; l >= 0; --l) {
        const LayerParams& lp = params.layers[static_cast<std::size_t>(l)];
        const LayerCache& lc = cache.layers[static_cast<std::size_t>(l)];
        LayerParams& lg = grads.layers[static_cast<std::size_t>(l)];

        // x_out = x_mid + mlp_act * w_proj + b_proj
        const Eigen::MatrixXd& d_out = d_x;
        lg.w_proj += lc.mlp_act.transpose() * d_out;
        lg.b_proj.col(0) += d_out.colwise().sum().transpose();
        const Eigen::MatrixXd d_act = d_out * lp.w_proj.transpose();
        const Eigen::MatrixXd d_pre =
            d_act.cwiseProduct(lc.mlp_pre.unaryExpr([](double v) { return gelu_grad(v); }));
        // ln2 output feeds the MLP; recompute it for the weight gradient
        // instead of caching another matrix.
        const Eigen::MatrixXd n2 =
            lc.ln2.xhat.cwiseProduct(lp.ln2_g.col(0).transpose().replicate(L, 1)).rowwise() +
            lp.ln2_b.col(0).transpose();
        lg.w_fc += n2.transpose() * d_pre;
        lg.b_fc.col(0) += d_pre.colwise().sum().transpose();
        const Eigen::MatrixXd d_n2 = d_pre * lp.w_fc.transpose();

        Eigen::MatrixXd d_x_mid = d_x;  // residual branch
        layernorm_backward(d_n2, lc.ln2, lp.ln2_g, d_x_mid, lg.ln2_g, lg.ln2_b);

        // x_mid = x_in + attn_concat * wo + bo
        lg.wo += lc.attn_concat.transpose() * d_x_mid;
        lg.bo.col(0) += d_x_mid.colwise().sum().transpose();
        const Eigen::MatrixXd d_concat = d_x_mid * lp.wo.transpose();

        Eigen::MatrixXd d_q = Eigen::MatrixXd::Zero(L, d);
        Eigen::MatrixXd d_k = Eigen::MatrixXd::Zero(L, d);
        Eigen::MatrixXd d_v = Eigen::MatrixXd::Zero(L, d);
        for (int h = 0; h < nh; ++h) {
            const auto qh = lc.q.middleCols(h * dh, dh);
            const auto kh = lc.k.middleCols(h * dh, dh);
            const auto vh = lc.v.middleCols(h * dh, dh);
            const Eigen::MatrixXd& probs = lc.attn_probs[static_cast<std::size_t>(h)];
            const auto d_oh = d_concat.middleCols(h * dh, dh);

            const Eigen::MatrixXd d_probs = d_oh * vh.transpose();
            d_v.middleCols(h * dh, dh) = probs.transpose() * d_oh;

            // Softmax backward; masked entries carry zero probability.
            Eigen::MatrixXd d_scores(L, L);
            for (int i = 0; i < L; ++i) {
                const double dot = d_probs.row(i).cwiseProduct(probs.row(i)).sum();
                d_scores.row(i) =
                    probs.row(i).cwiseProduct(d_probs.row(i).array().matrix() -
                                              Eigen::RowVectorXd::Constant(L, dot));
            }
            d_q.middleCols(h * dh, dh) = d_scores * kh * inv_sqrt_dh;
            d_k.middleCols(h * dh, dh) = d_scores.transpose() * qh * inv_sqrt_dh;
        }

        const Eigen::MatrixXd n1 =
            lc.ln1.xhat.cwiseProduct(lp.ln1_g.col(0).transpose().replicate(L, 1)).rowwise() +
            lp.ln1_b.col(0).transpose();
        lg.wq += n1.transpose() * d_q;
        lg.bq.col(0) += d_q.colwise().sum().transpose();
        lg.wk += n1.transpose() * d_k;
        lg.bk.col(0) += d_k.colwise().sum().transpose();
        lg.wv += n1.transpose() * d_v;
        lg.bv.col(0) += d_v.colwise().sum().transpose();
        const Eigen::MatrixXd d_n1 =
            d_q * lp.wq.transpose() + d_k * lp.wk.transpose() + d_v * lp.wv.transpose();

        Eigen::MatrixXd d_x_in = d_x_mid;  // residual branch
        layernorm_backward(d_n1, lc.ln1, lp.ln1_g, d_x_in, lg.ln1_g, lg.ln1_b);
        d_x = d_x_in;
    }

    for (int i = 0; i < L; ++i) {
        grads.tok_emb.row(cache.tokens[static_cast<std::size_t>(i)]) += d_x.row(i);
        grads.pos_emb.row(i) += d_x.row(i);
    }
}

Eigen::MatrixXd project_cached(const ProjectionHead& head, const Eigen::MatrixXd& hidden,
                               Precision precision, ProjectionCache& cache) {
    if (hidden.cols() != head.w1.rows()) {
        throw ValidationError("project: hidden width " + std::to_string(hidden.cols()) +
                              " does not match head input width " +
                              std::to_string(head.w1.rows()));
    }
    const Eigen::Index L = hidden.rows();
    cache.input = hidden;
    cache.pre_act = (hidden * head.w1).rowwise() + head.b1.col(0).transpose();
    cache.act = cache.pre_act.unaryExpr([](double v) { return gelu(v); });
    cache.pre_norm = (cache.act * head.w2).rowwise() + head.b2.col(0).transpose();
    cache.norms.resize(L);
    Eigen::MatrixXd z(L, cache.pre_norm.cols());
    for (Eigen::Index i = 0; i < L; ++i) {
        const double n = cache.pre_norm.row(i).norm();
        cache.norms(i) = n;
        if (precision == Precision::full) {
            if (n < kNormFloor) {
                throw Error("project: degenerate pre-normalization vector at token " +
                            std::to_string(i));
            }
            z.row(i) = cache.pre_norm.row(i) / n;
        } else {
            z.row(i) = cache.pre_norm.row(i) / (n + kNormClamp);
        }
    }
    return z;
}

Eigen::MatrixXd project(const ProjectionHead& head, const Eigen::MatrixXd& hidden,
                        Precision precision) {
    ProjectionCache cache;
    return project_cached(head, hidden, precision, cache);
}

Eigen::MatrixXd project_backward(const ProjectionHead& head, const ProjectionCache& cache,
                                 const Eigen::MatrixXd& d_z, Precision precision,
                                 ProjectionHead& head_grads) {
    const Eigen::Index L = cache.input.rows();
    Eigen::MatrixXd d_pre_norm(L, cache.pre_norm.cols());
    for (Eigen::Index i = 0; i < L; ++i) {
        const double n = cache.norms(i);
        const double denom = precision == Precision::full ? n : n + kNormClamp;
        const Eigen::RowVectorXd v = cache.pre_norm.row(i);
        const double v_dot_dz = v.dot(d_z.row(i));
        // z = v / denom with denom depending on ||v||.
        d_pre_norm.row(i) = d_z.row(i) / denom;
        if (n > kNormFloor) {
            d_pre_norm.row(i) -= v * (v_dot_dz / (n * denom * denom));
        }
    }
    head_grads.w2 += cache.act.transpose() * d_pre_norm;
    head_grads.b2.col(0) += d_pre_norm.colwise().sum().transpose();
    const Eigen::MatrixXd d_act = d_pre_norm * head.w2.transpose();
    const Eigen::MatrixXd d_pre =
        d_act.cwiseProduct(cache.pre_act.unaryExpr([](double v) { return gelu_grad(v); }));
    head_grads.w1 += cache.input.transpose() * d_pre;
    head_grads.b1.col(0) += d_pre.colwise().sum().transpose();
    return d_pre * head.w1.transpose();
}

void sgd_step(Parameters& params, const Parameters& grads, double lr) {
    auto ps = parameter_list(params);
    auto gs = parameter_list(const_cast<Parameters&>(grads));
    for (std::size_t i = 0; i < ps.size(); ++i) {
        *ps[i].second -= lr * *gs[i].second;
    }
    if (params.config.precision == Precision::reduced) round_to_reduced(params);
}

namespace {

nlohmann::json config_to_json(const ModelConfig& c) {
    return nlohmann::json{{"vocab_size", c.vocab_size},   {"d_model", c.d_model},
                          {"n_layers", c.n_layers},       {"n_heads", c.n_heads},
                          {"max_length", c.max_length},   {"proj_hidden", c.proj_hidden},
                          {"proj_out", c.proj_out},       {"precision", precision_name(c.precision)},
                          {"seed", c.seed}};
}

ModelConfig config_from_json(const nlohmann::json& j) {
    ModelConfig c;
    c.vocab_size = j.at("vocab_size").get<int>();
    c.d_model = j.at("d_model").get<int>();
    c.n_layers = j.at("n_layers").get<int>();
    c.n_heads = j.at("n_heads").get<int>();
    c.max_length = j.at("max_length").get<int>();
    c.proj_hidden = j.at("proj_hidden").get<int>();
    c.proj_out = j.at("proj_out").get<int>();
    c.precision = precision_from_name(j.at("precision").get<std::string>());
    c.seed = j.at("seed").get<uint64_t>();
    return c;
}

template <typename T>
void write_pod(std::ofstream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw Error("checkpoint: truncated file");
    return v;
}

}  // namespace

void save_checkpoint(const std::string& path, const Parameters& params, uint64_t step) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write checkpoint: " + path);
    out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
    write_pod<uint32_t>(out, 1);  // format version
    const std::string cfg = config_to_json(params.config).dump();
    write_pod<uint64_t>(out, cfg.size());
    out.write(cfg.data(), static_cast<std::streamsize>(cfg.size()));
    write_pod<uint64_t>(out, step);
    const auto list = parameter_list(params);
    write_pod<uint32_t>(out, static_cast<uint32_t>(list.size()));
    for (const auto& [name, mat] : list) {
        write_pod<uint32_t>(out, static_cast<uint32_t>(name.size()));
        out.write(name.data(), static_cast<std::streamsize>(name.size()));
        write_pod<uint64_t>(out, static_cast<uint64_t>(mat->rows()));
        write_pod<uint64_t>(out, static_cast<uint64_t>(mat->cols()));
        out.write(reinterpret_cast<const char*>(mat->data()),
                  static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(
                                                                    mat->size())));
    }
    if (!out) throw Error("write failed for checkpoint: " + path);
}

std::pair<Parameters, uint64_t> load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open checkpoint: " + path);
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0) {
        throw ValidationError("not a checkpoint file: " + path);
    }
    const uint32_t version = read_pod<uint32_t>(in);
    if (version != 1) {
        throw ValidationError("unsupported checkpoint version " + std::to_string(version));
    }
    const uint64_t cfg_len = read_pod<uint64_t>(in);
    std::string cfg_str(cfg_len, '\0');
    in.read(cfg_str.data(), static_cast<std::streamsize>(cfg_len));
    if (!in) throw Error("checkpoint: truncated config");
    const ModelConfig config = config_from_json(nlohmann::json::parse(cfg_str));

    Parameters params = make_empty(config);
    const uint64_t step = read_pod<uint64_t>(in);
    const uint32_t n_params = read_pod<uint32_t>(in);
    auto list = parameter_list(params);
    if (n_params != list.size()) {
        throw ValidationError("checkpoint parameter count mismatch in " + path);
    }
    for (auto& [name, mat] : list) {
        const uint32_t name_len = read_pod<uint32_t>(in);
        std::string stored(name_len, '\0');
        in.read(stored.data(), name_len);
        if (!in || stored != name) {
            throw ValidationError("checkpoint parameter order mismatch: expected '" + name +
                                  "', found '" + stored + "'");
        }
        const uint64_t rows = read_pod<uint64_t>(in);
        const uint64_t cols = read_pod<uint64_t>(in);
        if (rows != static_cast<uint64_t>(mat->rows()) ||
            cols != static_cast<uint64_t>(mat->cols())) {
            throw ValidationError("checkpoint shape mismatch for '" + name + "'");
        }
        in.read(reinterpret_cast<char*>(mat->data()),
                static_cast<std::streamsize>(sizeof(double) *
                                             static_cast<std::size_t>(mat->size())));
        if (!in) throw Error("checkpoint: truncated data for '" + name + "'");
    }
    return {std::move(params), step};
}

std::vector<int> generate_greedy(const CausalLmAdapter& model, std::vector<int> prompt_tokens,
                                 int max_new_tokens, int eos_id) {
    std::vector<int> generated;
    if (prompt_tokens.empty()) return generated;
    const int limit = model.context_limit();
    if (static_cast<int>(prompt_tokens.size()) > limit) {
        prompt_tokens.erase(prompt_tokens.begin(),
                            prompt_tokens.end() - limit);  // keep the most recent context
    }
    for (int n = 0; n < max_new_tokens; ++n) {
        if (static_cast<int>(prompt_tokens.size()) >= limit) break;
        const ForwardOutput out = model.forward_tokens(prompt_tokens);
        const Eigen::Index last = out.logits.rows() - 1;
        int best = 0;
        double best_score = out.logits(last, 0);
        for (int v = 1; v < model.vocab_size(); ++v) {
            if (out.logits(last, v) > best_score) {
                best_score = out.logits(last, v);
                best = v;
            }
        }
        if (best == eos_id) break;
        generated.push_back(best);
        prompt_tokens.push_back(best);
    }
    return generated;
}

std::vector<int> generate_greedy(const Parameters& params, std::vector<int> prompt_tokens,
                                 int max_new_tokens, int eos_id) {
    return generate_greedy(DeskModelAdapter(params), std::move(prompt_tokens), max_new_tokens,
                           eos_id);
}

}  // namespace dbc
