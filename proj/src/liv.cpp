#include "livsynth/liv.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

#include "livsynth/errors.hpp"

namespace livsynth {

using grad::Tensor;

int CompileDims::hidden() const {
  if (mlp_hidden > 0) return mlp_hidden;
  const int raw = (8 * width + 2) / 3;
  return ((raw + 7) / 8) * 8;
}

StructureKind structure_of(const OperatorGenome& op) {
  switch (op.token_mixing) {
    case TokenMixing::Diagonal: return StructureKind::Memoryless;
    case TokenMixing::LowRank: return StructureKind::Attention;
    case TokenMixing::SemiSeparable: return StructureKind::Recurrence;
    case TokenMixing::ScaledToeplitz: return StructureKind::Convolution;
  }
  throw PoolError("unknown token-mixing structure");
}

const Tensor& find_group(const FeatureGroups& groups, const std::string& role, int branch) {
  for (const auto& g : groups)
    if (g.role == role && g.branch == branch) return g.values;
  throw InputError("feature group '" + role + "' (branch " + std::to_string(branch) + ") is missing");
}

std::string LivInstance::featurizer_key(const std::string& role, int branch, const std::string& part) const {
  return featurizer_binding + ".b" + std::to_string(branch) + "." + role + "." + part;
}

std::string LivInstance::output_key(int branch) const {
  return "liv" + std::to_string(index) + ".b" + std::to_string(branch) + ".out";
}

std::string LivInstance::norm_key() const { return "liv" + std::to_string(index) + ".norm"; }

std::vector<double> DenseOperator::apply(std::span<const double> x) const {
  std::vector<double> y(seq_len * width, 0.0);
  for (std::size_t i = 0; i < seq_len; ++i)
    for (std::size_t j = 0; j <= i; ++j)
      for (std::size_t o = 0; o < width; ++o) {
        double s = 0.0;
        for (std::size_t b = 0; b < width; ++b) s += at(i, j, o, b) * x[j * width + b];
        y[i * width + o] += s;
      }
  return y;
}

namespace {

const FeatureGroupSpec* find_spec(const LivInstance& inst, const std::string& role) {
  for (const auto& g : inst.featurizer.groups)
    if (g.role == role) return &g;
  return nullptr;
}

bool has_conv(const FeatureGroupSpec& g) {
  return g.token_mixing == TokenMixing::ScaledToeplitz && g.parametrization == Parametrization::InputProjection;
}

// Projection output channels for a role, before any replication.
int projection_width(const LivInstance& inst, const FeatureGroupSpec& g, int d) {
  switch (inst.kind) {
    case StructureKind::Attention: return d / std::max(g.repeat_factor, 1);
    case StructureKind::Recurrence: return (g.role == "B" || g.role == "C") ? g.expansion_factor : d;
    case StructureKind::Convolution: return d;
    case StructureKind::Memoryless: return inst.inner_width;
  }
  return d;
}

std::size_t band_of(const LivInstance& inst, const CompileDims& dims) {
  if (inst.op.sparsity != Sparsity::Banded) return 0;
  return static_cast<std::size_t>(dims.band > 0 ? dims.band : dims.short_kernel);
}

double logit(double p) { return std::log(p / (1.0 - p)); }

Tensor implicit_features(int len, int features) {
  std::vector<double> phi(static_cast<std::size_t>(len) * features);
  for (int t = 0; t < len; ++t)
    for (int f = 0; f < features; ++f) {
      double v = 1.0;
      if (f > 0) {
        const double freq = 2.0 * std::numbers::pi * ((f + 1) / 2) / len;
        v = (f % 2 == 1) ? std::sin(freq * t) : std::cos(freq * t);
      }
      phi[static_cast<std::size_t>(t) * features + f] = v;
    }
  return Tensor::constant(len, features, std::move(phi));
}

Tensor implicit_window(int len, int width) {
  std::vector<double> w(static_cast<std::size_t>(len) * width);
  for (int t = 0; t < len; ++t)
    for (int c = 0; c < width; ++c) {
      const double rate = (0.5 + 4.0 * c / std::max(width - 1, 1)) / len;
      w[static_cast<std::size_t>(t) * width + c] = std::exp(-rate * t);
    }
  return Tensor::constant(len, width, std::move(w));
}

Tensor activate(const Tensor& t, Nonlinearity nl) {
  switch (nl) {
    case Nonlinearity::None: return t;
    case Nonlinearity::Swish: return grad::swish(t);
    case Nonlinearity::Relu: return grad::relu(t);
    case Nonlinearity::Softmax: break;
  }
  throw CompileError("softmax is only defined over the token axis of a low-rank operator");
}

double activate_scalar(double v, Nonlinearity nl) {
  switch (nl) {
    case Nonlinearity::None: return v;
    case Nonlinearity::Swish: return v / (1.0 + std::exp(-v));
    case Nonlinearity::Relu: return std::max(v, 0.0);
    case Nonlinearity::Softmax: break;
  }
  throw CompileError("softmax is only defined over the token axis of a low-rank operator");
}

std::uint64_t key_stream(const std::string& key) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : key) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace

std::vector<std::string> CompiledBackbone::featurizer_bindings() const {
  std::set<std::string> s;
  for (const auto& inst : instances_) s.insert(inst.featurizer_binding);
  return {s.begin(), s.end()};
}

FeatureGroups CompiledBackbone::featurize(std::size_t i, const Tensor& x) const {
  const auto& inst = instances_.at(i);
  const int d = dims_.width;
  if (static_cast<int>(x.cols()) != d) throw ShapeError("featurize: input width does not match the model");
  FeatureGroups out;
  for (int b = 0; b < inst.branches; ++b) {
    for (const auto& g : inst.featurizer.groups) {
      if (inst.is_routed(g.role)) continue;
      Tensor v;
      if (g.parametrization == Parametrization::Explicit) {
        v = params_.get(inst.featurizer_key(g.role, b, "kernel"));
      } else if (g.parametrization == Parametrization::Implicit) {
        const Tensor phi = implicit_features(inst.kernel_len, dims_.implicit_features);
        v = grad::multiply(grad::matmul(phi, params_.get(inst.featurizer_key(g.role, b, "implicit"))),
                           implicit_window(inst.kernel_len, d));
      } else {
        const Tensor& w = params_.get(inst.featurizer_key(g.role, b, "w"));
        v = g.channel_mixing == ChannelMixing::Diagonal ? grad::mul_row(x, w) : grad::matmul(x, w);
        if (has_conv(g)) v = grad::causal_conv1d(v, params_.get(inst.featurizer_key(g.role, b, "conv")));
        if (inst.kind == StructureKind::Recurrence && g.role == "A")
          v = grad::sigmoid(grad::add_row(v, params_.get(inst.featurizer_key(g.role, b, "bias"))));
        v = activate(v, g.nonlinearity);
        if (g.repeat_factor > 1) v = grad::tile_cols(v, static_cast<std::size_t>(g.repeat_factor));
        if (inst.kind == StructureKind::Recurrence && (g.role == "B" || g.role == "C"))
          v = grad::tile_cols(v, static_cast<std::size_t>(d));
      }
      out.push_back({g.role, b, std::move(v)});
    }
  }
  return out;
}

Tensor CompiledBackbone::apply_structured(std::size_t i, const FeatureGroups& groups, const Tensor& x) const {
  const auto& inst = instances_.at(i);
  const std::size_t d = static_cast<std::size_t>(dims_.width);
  const std::size_t band = band_of(inst, dims_);
  Tensor y;
  for (int b = 0; b < inst.branches; ++b) {
    Tensor z;
    switch (inst.kind) {
      case StructureKind::Attention: {
        const Tensor& q = find_group(groups, "Q", b);
        const Tensor& k = find_group(groups, "K", b);
        const Tensor& v = find_group(groups, "V", b);
        const auto hd = static_cast<std::size_t>(inst.head_dim);
        const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(hd));
        std::vector<Tensor> heads;
        for (std::size_t h = 0; h < d / hd; ++h) {
          const Tensor qh = grad::scale(grad::slice_cols(q, h * hd, hd), inv_sqrt);
          const Tensor kh = grad::slice_cols(k, h * hd, hd);
          const Tensor vh = grad::slice_cols(v, h * hd, hd);
          if (inst.op.nonlinearity == Nonlinearity::None && band == 0) {
            // Linear time: S_i = sum_{j<=i} v_j k_j^T, y_i = S_i q_i.
            const Tensor outer = grad::multiply(grad::repeat_cols(vh, hd), grad::tile_cols(kh, hd));
            const Tensor state = grad::gated_scan(Tensor::filled(outer.rows(), outer.cols(), 1.0), outer, dims_.scan);
            heads.push_back(grad::group_sum_cols(grad::multiply(state, grad::tile_cols(qh, hd)), hd));
            continue;
          }
          const Tensor scores = grad::matmul(qh, grad::transpose(kh));
          Tensor mix;
          switch (inst.op.nonlinearity) {
            case Nonlinearity::Softmax: mix = grad::causal_softmax(scores, band); break;
            case Nonlinearity::None: mix = grad::causal_mask(scores, band); break;
            case Nonlinearity::Relu: mix = grad::causal_mask(grad::relu(scores), band); break;
            case Nonlinearity::Swish: mix = grad::causal_mask(grad::swish(scores), band); break;
          }
          heads.push_back(grad::matmul(mix, vh));
        }
        z = heads.size() == 1 ? heads.front() : grad::concat_cols(heads);
        break;
      }
      case StructureKind::Recurrence: {
        const auto n = static_cast<std::size_t>(inst.state_size);
        const Tensor& v = find_group(groups, "V", b);
        const Tensor& gate = find_group(groups, "G", b);
        const Tensor& a = find_group(groups, "A", b);
        const Tensor& bb = find_group(groups, "B", b);
        const Tensor& cc = find_group(groups, "C", b);
        const Tensor u = grad::multiply(grad::repeat_cols(v, n), bb);
        const Tensor h = grad::gated_scan(grad::repeat_cols(a, n), u, dims_.scan);
        z = grad::multiply(grad::group_sum_cols(grad::multiply(h, cc), n), gate);
        break;
      }
      case StructureKind::Convolution: {
        const Tensor& kernel = find_group(groups, "kernel", b);
        const Tensor& bb = find_group(groups, "B", b);
        const Tensor& cc = find_group(groups, "C", b);
        z = grad::multiply(cc, grad::causal_conv1d(grad::multiply(bb, x), kernel));
        break;
      }
      case StructureKind::Memoryless: {
        const Tensor& gate = find_group(groups, "gate", b);
        const Tensor& up = find_group(groups, "up", b);
        z = grad::multiply(activate(gate, inst.op.nonlinearity), up);
        break;
      }
    }
    Tensor yb = grad::matmul(z, params_.get(inst.output_key(b)));
    y = b == 0 ? yb : grad::sub(y, yb);
  }
  if (!y.all_finite()) throw NumericError("non-finite LIV output in " + inst.name, i);
  return y;
}

Tensor CompiledBackbone::apply(std::size_t i, const Tensor& x) const {
  if (!instances_.at(i).routed.empty())
    throw InputError("instance " + std::to_string(i) + " consumes routed groups; use forward()");
  return apply_structured(i, featurize(i, x), x);
}

DenseOperator CompiledBackbone::materialize_dense(std::size_t idx, const FeatureGroups& groups,
                                                  std::size_t seq_len) const {
  if (seq_len > kDenseOracleCap)
    throw InputError("dense materialization refused: sequence length " + std::to_string(seq_len) + " exceeds cap " +
                     std::to_string(kDenseOracleCap));
  const auto& inst = instances_.at(idx);
  const std::size_t d = static_cast<std::size_t>(dims_.width);
  const std::size_t L = seq_len;
  const std::size_t band = band_of(inst, dims_);
  DenseOperator T{L, d, std::vector<double>(L * L * d * d, 0.0)};

  // Value path x -> projection -> optional short convolution -> replication, as explicit taps.
  struct ValuePath {
    std::vector<double> w;     // [d x width]
    std::vector<double> conv;  // [taps x width], empty for none
    std::size_t width = 0;
    std::size_t taps = 1;
    double tap(std::size_t s, std::size_t c) const {
      if (conv.empty()) return s == 0 ? 1.0 : 0.0;
      return s < taps ? conv[s * width + c] : 0.0;
    }
  };
  auto value_path = [&](const std::string& role, int b) {
    if (inst.is_routed(role)) throw InputError("dense materialization needs the '" + role + "' group to be local");
    const auto* spec = find_spec(inst, role);
    if (spec->nonlinearity != Nonlinearity::None)
      throw InputError("dense materialization needs a linear '" + role + "' group");
    ValuePath p;
    const auto& w = params_.get(inst.featurizer_key(role, b, "w"));
    p.w.assign(w.values().begin(), w.values().end());
    p.width = w.cols();
    if (has_conv(*spec)) {
      const auto& c = params_.get(inst.featurizer_key(role, b, "conv"));
      p.conv.assign(c.values().begin(), c.values().end());
      p.taps = c.rows();
    }
    return p;
  };

  for (int b = 0; b < inst.branches; ++b) {
    const double sign = b == 0 ? 1.0 : -1.0;
    const auto& wout_t = params_.get(inst.output_key(b));
    const auto wout = wout_t.values();  // [inner x d]
    // M[i][j][c][beta]: contribution of x_j^beta to inner channel c at position i.
    const std::size_t inner = wout_t.rows();
    std::vector<double> M(L * L * inner * d, 0.0);
    auto m_at = [&](std::size_t i, std::size_t j, std::size_t c, std::size_t beta) -> double& {
      return M[((i * L + j) * inner + c) * d + beta];
    };

    switch (inst.kind) {
      case StructureKind::Attention: {
        const auto q = find_group(groups, "Q", b).values();
        const auto k = find_group(groups, "K", b).values();
        const auto vp = value_path("V", b);
        const std::size_t hd = static_cast<std::size_t>(inst.head_dim);
        const std::size_t heads = d / hd;
        // P[h][i][m]
        std::vector<double> P(heads * L * L, 0.0);
        for (std::size_t h = 0; h < heads; ++h)
          for (std::size_t i = 0; i < L; ++i) {
            std::vector<double> s(L, 0.0);
            for (std::size_t m = 0; m <= i; ++m) {
              double dot = 0.0;
              for (std::size_t c = h * hd; c < (h + 1) * hd; ++c) dot += q[i * d + c] * k[m * d + c];
              s[m] = dot / std::sqrt(static_cast<double>(hd));
            }
            auto inside = [&](std::size_t m) { return m <= i && (band == 0 || i - m < band); };
            if (inst.op.nonlinearity == Nonlinearity::Softmax) {
              double mx = -INFINITY, z = 0.0;
              for (std::size_t m = 0; m <= i; ++m)
                if (inside(m)) mx = std::max(mx, s[m]);
              for (std::size_t m = 0; m <= i; ++m)
                if (inside(m)) z += std::exp(s[m] - mx);
              for (std::size_t m = 0; m <= i; ++m)
                if (inside(m)) P[(h * L + i) * L + m] = std::exp(s[m] - mx) / z;
            } else {
              for (std::size_t m = 0; m <= i; ++m)
                if (inside(m)) P[(h * L + i) * L + m] = activate_scalar(s[m], inst.op.nonlinearity);
            }
          }
        for (std::size_t i = 0; i < L; ++i)
          for (std::size_t j = 0; j <= i; ++j)
            for (std::size_t c = 0; c < d; ++c) {
              const std::size_t h = c / hd, c0 = c % vp.width;
              double coeff = 0.0;
              for (std::size_t m = j; m <= i; ++m) coeff += P[(h * L + i) * L + m] * vp.tap(m - j, c0);
              if (coeff == 0.0) continue;
              for (std::size_t beta = 0; beta < d; ++beta) m_at(i, j, c, beta) += coeff * vp.w[beta * vp.width + c0];
            }
        break;
      }
      case StructureKind::Recurrence: {
        const std::size_t n = static_cast<std::size_t>(inst.state_size);
        const auto gate = find_group(groups, "G", b).values();
        const auto a = find_group(groups, "A", b).values();
        const auto bb = find_group(groups, "B", b).values();
        const auto cc = find_group(groups, "C", b).values();
        const auto vp = value_path("V", b);
        for (std::size_t alpha = 0; alpha < d; ++alpha)
          for (std::size_t i = 0; i < L; ++i)
            for (std::size_t j = 0; j <= i; ++j) {
              double coeff = 0.0;
              for (std::size_t m = j; m <= i; ++m) {
                const double tap = vp.tap(m - j, alpha);
                if (tap == 0.0) continue;
                double decay = 1.0;
                for (std::size_t t = m + 1; t <= i; ++t) decay *= a[t * d + alpha];
                double cb = 0.0;
                for (std::size_t s = 0; s < n; ++s) cb += cc[i * d * n + alpha * n + s] * bb[m * d * n + alpha * n + s];
                coeff += cb * decay * tap;
              }
              coeff *= gate[i * d + alpha];
              for (std::size_t beta = 0; beta < d; ++beta) m_at(i, j, alpha, beta) += coeff * vp.w[beta * vp.width + alpha];
            }
        break;
      }
      case StructureKind::Convolution: {
        const auto& kt = find_group(groups, "kernel", b);
        const auto kern = kt.values();
        const auto bb = find_group(groups, "B", b).values();
        const auto cc = find_group(groups, "C", b).values();
        for (std::size_t i = 0; i < L; ++i)
          for (std::size_t j = 0; j <= i; ++j) {
            if (i - j >= kt.rows()) continue;
            for (std::size_t c = 0; c < d; ++c)
              m_at(i, j, c, c) += cc[i * d + c] * kern[(i - j) * d + c] * bb[j * d + c];
          }
        break;
      }
      case StructureKind::Memoryless: {
        const auto gate = find_group(groups, "gate", b).values();
        const auto up = value_path("up", b);
        for (std::size_t i = 0; i < L; ++i)
          for (std::size_t j = 0; j <= i; ++j)
            for (std::size_t c = 0; c < inner; ++c) {
              const double tap = up.tap(i - j, c);
              if (tap == 0.0) continue;
              const double coeff = activate_scalar(gate[i * inner + c], inst.op.nonlinearity) * tap;
              for (std::size_t beta = 0; beta < d; ++beta) m_at(i, j, c, beta) += coeff * up.w[beta * up.width + c];
            }
        break;
      }
    }
    // T_ij^{o beta} = sum_c Wout[c][o] M_ij^{c beta}
    for (std::size_t i = 0; i < L; ++i)
      for (std::size_t j = 0; j <= i; ++j)
        for (std::size_t c = 0; c < inner; ++c)
          for (std::size_t beta = 0; beta < d; ++beta) {
            const double mv = m_at(i, j, c, beta);
            if (mv == 0.0) continue;
            for (std::size_t o = 0; o < d; ++o) T.at(i, j, o, beta) += sign * wout[c * d + o] * mv;
          }
  }
  return T;
}

Tensor CompiledBackbone::forward(std::span<const int> tokens) const {
  Tensor h = grad::embed_lookup(params_.get("embed"), tokens);
  std::vector<Tensor> outputs;  // y^n per instance
  std::map<std::size_t, FeatureGroups> produced;
  std::set<std::size_t> producers;
  for (const auto& inst : instances_)
    for (const auto& [_, src] : inst.routed) producers.insert(src);

  for (std::size_t n = 0; n < instances_.size(); ++n) {
    const auto& inst = instances_[n];
    Tensor u = h;
    if (inst.residual_source) u = grad::add(u, outputs[*inst.residual_source]);
    const Tensor xn = grad::rms_norm(u, params_.get(inst.norm_key()));
    FeatureGroups groups = featurize(n, xn);
    for (const auto& [role, src] : inst.routed)
      for (const auto& g : produced.at(src))
        if (g.role == role) groups.push_back(g);
    const Tensor y = apply_structured(n, groups, xn);
    if (producers.count(n)) produced[n] = std::move(groups);
    h = grad::add(u, y);
    outputs.push_back(h);
  }
  return grad::matmul(grad::rms_norm(h, params_.get("final_norm")), params_.get("head"));
}

std::vector<LivInstance> plan_instances(const BackboneGenome& genome, const CompileDims& dims, const OptionPool& pool) {
  if (const auto violations = validate(genome, pool); !violations.empty()) {
    std::string msg = "invalid genome:";
    for (const auto& v : violations) msg += " [" + v.message + "]";
    throw CompileError(msg);
  }
  if (dims.width < 1 || dims.vocab < 1 || dims.seq_len < 1) throw CompileError("dimensions must be positive");
  if (genome.width != dims.width)
    throw CompileError("genome width " + std::to_string(genome.width) + " differs from compile width " +
                       std::to_string(dims.width));
  const int d = dims.width;
  std::vector<LivInstance> instances;

  for (std::size_t i = 0; i < genome.genes.size(); ++i) {
    const auto& gene = genome.genes[i];
    const auto& cls = pool.liv(gene.liv_class);
    LivInstance inst;
    inst.index = i;
    inst.class_id = cls.id;
    inst.name = cls.name;
    inst.op = cls.op;
    inst.featurizer = pool.featurizer(cls.op.featurizer_class);
    inst.kind = structure_of(cls.op);
    inst.differential = cls.op.differential;
    inst.branches = inst.differential ? 2 : 1;
    inst.featurizer_binding = "feat" + std::to_string(i);
    inst.inner_width = inst.kind == StructureKind::Memoryless ? dims.hidden() : d;
    switch (cls.op.channel_mixing) {
      case ChannelMixing::Grouped: inst.head_dim = std::min(dims.head_dim, d); break;
      case ChannelMixing::Dense: inst.head_dim = d; break;
      case ChannelMixing::Diagonal: inst.head_dim = 1; break;
    }
    if (inst.kind == StructureKind::Attention && d % inst.head_dim != 0)
      throw CompileError("head dimension " + std::to_string(inst.head_dim) + " does not divide width " +
                         std::to_string(d) + " (gene " + std::to_string(i + 1) + ")");
    for (const auto& g : inst.featurizer.groups) {
      if (g.role == "K") inst.kv_repeat = g.repeat_factor;
      if (g.role == "B" && inst.kind == StructureKind::Recurrence) inst.state_size = g.expansion_factor;
      if (g.role == "kernel")
        inst.kernel_len = g.parametrization == Parametrization::Implicit ? dims.seq_len : dims.short_kernel;
      if (g.repeat_factor > 1 && d % g.repeat_factor != 0)
        throw CompileError("repeat factor " + std::to_string(g.repeat_factor) + " does not divide width " +
                           std::to_string(d) + " (gene " + std::to_string(i + 1) + ")");
    }
    if (cls.op.sparsity == Sparsity::Banded &&
        (inst.kind == StructureKind::Recurrence || inst.kind == StructureKind::Convolution))
      throw CompileError(cls.name + ": banded masks are supported for low-rank and diagonal structures only");
    instances.push_back(std::move(inst));
  }

  for (const auto& grp : featurizer_sharing_groups(genome))
    for (std::size_t m : grp.members) instances[m].featurizer_binding = "feat" + std::to_string(grp.members.front());

  for (const auto& grp : feature_group_sharing_groups(genome)) {
    const std::size_t head = grp.members.front();
    const auto roles = pool.group_share_strategies(genome.genes[head].liv_class).at(grp.strategy - 1);
    for (std::size_t k = 1; k < grp.members.size(); ++k) {
      auto& consumer = instances[grp.members[k]];
      const auto& producer = instances[head];
      if (consumer.kind != producer.kind || consumer.head_dim != producer.head_dim ||
          consumer.kv_repeat != producer.kv_repeat || consumer.state_size != producer.state_size ||
          consumer.kernel_len != producer.kernel_len || consumer.branches != producer.branches)
        throw CompileError("feature groups of gene " + std::to_string(head + 1) + " are incompatible with gene " +
                           std::to_string(grp.members[k] + 1));
      for (const auto& role : roles) consumer.routed[role] = head;
    }
  }

  for (const auto& grp : residual_groups(genome))
    for (std::size_t k = 1; k < grp.members.size(); ++k) instances[grp.members[k]].residual_source = grp.members[k - 1];
  return instances;
}

std::vector<ParameterSpec> parameter_layout(const std::vector<LivInstance>& instances, const CompileDims& dims) {
  const auto d = static_cast<std::size_t>(dims.width);
  std::vector<ParameterSpec> out;
  std::set<std::string> seen;
  auto add = [&](std::string key, std::size_t rows, std::size_t cols, ParameterInit init, bool decay,
                 std::optional<std::size_t> owner) {
    if (!seen.insert(key).second) return;
    out.push_back({std::move(key), rows, cols, init, decay, owner});
  };

  add("embed", static_cast<std::size_t>(dims.vocab), d, ParameterInit::Normal, true, std::nullopt);
  for (const auto& inst : instances) {
    add(inst.norm_key(), 1, d, ParameterInit::Ones, false, inst.index);
    for (int b = 0; b < inst.branches; ++b) {
      for (const auto& g : inst.featurizer.groups) {
        if (inst.is_routed(g.role)) continue;
        if (g.parametrization == Parametrization::Explicit) {
          add(inst.featurizer_key(g.role, b, "kernel"), static_cast<std::size_t>(inst.kernel_len), d,
              ParameterInit::PassThroughTaps, true, inst.index);
          continue;
        }
        if (g.parametrization == Parametrization::Implicit) {
          add(inst.featurizer_key(g.role, b, "implicit"), static_cast<std::size_t>(dims.implicit_features), d,
              ParameterInit::PassThroughTaps, true, inst.index);
          continue;
        }
        const auto width = static_cast<std::size_t>(projection_width(inst, g, dims.width));
        if (g.channel_mixing == ChannelMixing::Diagonal)
          add(inst.featurizer_key(g.role, b, "w"), 1, d, ParameterInit::OnePlusNormal, false, inst.index);
        else
          add(inst.featurizer_key(g.role, b, "w"), d, width, ParameterInit::Normal, true, inst.index);
        if (has_conv(g))
          add(inst.featurizer_key(g.role, b, "conv"), static_cast<std::size_t>(dims.short_kernel), width,
              ParameterInit::PassThroughTaps, true, inst.index);
        if (inst.kind == StructureKind::Recurrence && g.role == "A")
          add(inst.featurizer_key(g.role, b, "bias"), 1, width, ParameterInit::DecayBias, false, inst.index);
      }
      add(inst.output_key(b), static_cast<std::size_t>(inst.inner_width), d, ParameterInit::Normal, true, inst.index);
    }
  }
  add("final_norm", 1, d, ParameterInit::Ones, false, std::nullopt);
  add("head", d, static_cast<std::size_t>(dims.vocab), ParameterInit::Normal, true, std::nullopt);
  return out;
}

CompiledBackbone compile(const BackboneGenome& genome, const CompileDims& dims, const OptionPool& pool,
                         std::uint64_t seed) {
  CompiledBackbone model;
  model.dims_ = dims;
  model.genome_ = genome;
  model.instances_ = plan_instances(genome, dims, pool);

  for (const auto& spec : parameter_layout(model.instances_, dims)) {
    const std::size_t n = spec.rows * spec.cols;
    std::vector<double> v(n, 0.0);
    if (spec.init == ParameterInit::Ones) {
      std::fill(v.begin(), v.end(), 1.0);
    } else if (spec.init == ParameterInit::DecayBias) {
      // Decay rates spread over 0.9..0.99.
      for (std::size_t c = 0; c < n; ++c) v[c] = logit(0.9 + 0.09 * static_cast<double>(c) / std::max<std::size_t>(n - 1, 1));
    } else {
      Rng rng(seed, key_stream(spec.key));
      for (auto& x : v) x = dims.init_std * rng.normal();
      if (spec.init == ParameterInit::OnePlusNormal)
        for (auto& x : v) x += 1.0;
      if (spec.init == ParameterInit::PassThroughTaps)
        for (std::size_t c = 0; c < spec.cols; ++c) v[c] += 1.0;
    }
    model.params_.add(spec.key, spec.rows, spec.cols, std::move(v), spec.decay);
  }
  return model;
}

}  // namespace livsynth
