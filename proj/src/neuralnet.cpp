#include "braidforge/neuralnet.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>

#include "braidforge/error.hpp"

namespace braidforge {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using nlohmann::json;

namespace {

constexpr const char* kCheckpointMagic = "bf-ckpt-1\n";

double act_value(Activation a, double z) {
  switch (a) {
    case Activation::Tanh:
      return std::tanh(z);
    case Activation::LeakyRelu:
      return z > 0 ? z : kLeakySlope * z;
    case Activation::Gelu:
      return 0.5 * z * (1.0 + std::erf(z / std::numbers::sqrt2));
    case Activation::Identity:
      return z;
  }
  return z;
}

double act_derivative(Activation a, double z) {
  switch (a) {
    case Activation::Tanh: {
      const double t = std::tanh(z);
      return 1.0 - t * t;
    }
    case Activation::LeakyRelu:
      return z > 0 ? 1.0 : kLeakySlope;
    case Activation::Gelu: {
      const double pdf = std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
      return 0.5 * (1.0 + std::erf(z / std::numbers::sqrt2)) + z * pdf;
    }
    case Activation::Identity:
      return 1.0;
  }
  return 1.0;
}

MatrixXd apply_act(Activation a, const MatrixXd& z) {
  if (a == Activation::Identity) return z;
  return z.unaryExpr([a](double v) { return act_value(a, v); });
}

MatrixXd act_grad(Activation a, const MatrixXd& z) {
  if (a == Activation::Identity) return MatrixXd::Ones(z.rows(), z.cols());
  return z.unaryExpr([a](double v) { return act_derivative(a, v); });
}

// Row s holds the input rotated left by s letter slots.
MatrixXd circulant_patches(const Eigen::Ref<const VectorXd>& x, int length, int channels) {
  MatrixXd P(length, length * channels);
  for (int s = 0; s < length; ++s)
    for (int k = 0; k < length; ++k)
      for (int c = 0; c < channels; ++c) P(s, k * channels + c) = x(((s + k) % length) * channels + c);
  return P;
}

[[noreturn]] void shape_error(const std::string& what) { throw Error(Errc::ShapeMismatch, what); }

}  // namespace

std::string activation_name(Activation a) {
  switch (a) {
    case Activation::Tanh:
      return "tanh";
    case Activation::LeakyRelu:
      return "leaky-relu";
    case Activation::Gelu:
      return "gelu";
    case Activation::Identity:
      return "identity";
  }
  return "identity";
}

Activation activation_from_name(const std::string& name) {
  if (name == "tanh") return Activation::Tanh;
  if (name == "leaky-relu") return Activation::LeakyRelu;
  if (name == "gelu") return Activation::Gelu;
  if (name == "identity") return Activation::Identity;
  throw Error(Errc::FormatError, "unknown activation " + name);
}

std::string scheme_name(Scheme s) { return s == Scheme::OneHot ? "one-hot" : "signed-integer"; }

Scheme scheme_from_name(const std::string& name) {
  if (name == "one-hot") return Scheme::OneHot;
  if (name == "signed-integer") return Scheme::SignedInteger;
  throw Error(Errc::FormatError, "unknown scheme " + name);
}

Scaler Scaler::fit(const KnotClassDataset& ds, std::size_t length) {
  double sum = 0, sum_sq = 0;
  std::size_t n = 0;
  for (const auto& c : ds.classes) {
    for (const auto& w : c.reps) {
      for (int k : w.letters()) {
        sum += k;
        sum_sq += static_cast<double>(k) * k;
      }
      n += std::max(length, w.size());
    }
  }
  Scaler s;
  if (n == 0) return s;
  s.mean = sum / static_cast<double>(n);
  const double var = sum_sq / static_cast<double>(n) - s.mean * s.mean;
  s.stddev = var > 1e-12 ? std::sqrt(var) : 1.0;
  return s;
}

VectorXd encode_signed(const BraidWord& w, std::size_t length, const Scaler& scaler) {
  if (w.size() > length) {
    throw Error(Errc::TooLong, std::to_string(w.size()) + " letters exceed " + std::to_string(length));
  }
  VectorXd v = VectorXd::Constant(static_cast<Eigen::Index>(length), scaler.apply(0.0));
  for (std::size_t i = 0; i < w.size(); ++i) v(static_cast<Eigen::Index>(i)) = scaler.apply(w[i]);
  return v;
}

MatrixXd encode_one_hot(const BraidWord& w, int n_strands) {
  const int width = 2 * (n_strands - 1);
  MatrixXd m = MatrixXd::Zero(static_cast<Eigen::Index>(w.size()), width);
  for (std::size_t i = 0; i < w.size(); ++i) {
    const int k = w[i];
    if (std::abs(k) > n_strands - 1) {
      throw Error(Errc::LetterOutOfRange, "letter " + std::to_string(k) + " needs more than " +
                                               std::to_string(n_strands) + " strands");
    }
    m(static_cast<Eigen::Index>(i), 2 * (std::abs(k) - 1) + (k < 0 ? 1 : 0)) = 1.0;
  }
  return m;
}

VectorXd InputEncoding::encode(const BraidWord& w) const {
  if (scheme == Scheme::SignedInteger) return encode_signed(w, static_cast<std::size_t>(length), scaler);
  if (w.size() > static_cast<std::size_t>(length)) {
    throw Error(Errc::TooLong, std::to_string(w.size()) + " letters exceed " + std::to_string(length));
  }
  const MatrixXd oh = encode_one_hot(w, n_strands);
  VectorXd v = VectorXd::Zero(input_dim());
  const int ch = channels();
  for (Eigen::Index r = 0; r < oh.rows(); ++r)
    for (int c = 0; c < ch; ++c) v(r * ch + c) = oh(r, c);
  return v;
}

MatrixXd InputEncoding::encode_batch(std::span<const BraidWord> words) const {
  MatrixXd X(input_dim(), static_cast<Eigen::Index>(words.size()));
  for (std::size_t i = 0; i < words.size(); ++i) X.col(static_cast<Eigen::Index>(i)) = encode(words[i]);
  return X;
}

InputEncoding InputEncoding::fit(const KnotClassDataset& ds, Scheme scheme) {
  InputEncoding e;
  e.scheme = scheme;
  e.length = static_cast<int>(ds.word_length());
  e.n_strands = ds.max_strands();
  if (scheme == Scheme::SignedInteger) e.scaler = Scaler::fit(ds, static_cast<std::size_t>(e.length));
  return e;
}

int layer_input_dim(const LayerSpec& l) noexcept {
  return std::visit(
      [](const auto& s) -> int {
        if constexpr (std::is_same_v<std::decay_t<decltype(s)>, DenseSpec>) {
          return s.in;
        } else {
          return s.length * s.channels;
        }
      },
      l);
}

int layer_output_dim(const LayerSpec& l) noexcept {
  return std::visit(
      [](const auto& s) -> int {
        if constexpr (std::is_same_v<std::decay_t<decltype(s)>, DenseSpec>) {
          return s.out;
        } else {
          return s.filters;
        }
      },
      l);
}

std::size_t layer_param_count(const LayerSpec& l) noexcept {
  const auto in = static_cast<std::size_t>(layer_input_dim(l));
  const auto out = static_cast<std::size_t>(layer_output_dim(l));
  return out * in + out;
}

Encoder::Encoder(std::vector<LayerSpec> layers) : layers_(std::move(layers)) {
  if (layers_.empty()) shape_error("encoder needs at least one layer");
  std::size_t offset = 0;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    if (layer_input_dim(layers_[i]) <= 0 || layer_output_dim(layers_[i]) <= 0) shape_error("empty layer");
    if (i > 0 && layer_output_dim(layers_[i - 1]) != layer_input_dim(layers_[i])) {
      shape_error("layer " + std::to_string(i) + " does not compose with its predecessor");
    }
    if (i > 0 && std::holds_alternative<CircularConvSpec>(layers_[i])) {
      shape_error("circular convolution must be the first layer");
    }
    offsets_.push_back(offset);
    offset += layer_param_count(layers_[i]);
  }
  params_ = VectorXd::Zero(static_cast<Eigen::Index>(offset));
}

void Encoder::init_uniform(Rng& rng) {
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(layer_input_dim(layers_[i])));
    std::uniform_real_distribution<double> dist(-bound, bound);
    const std::size_t n = layer_param_count(layers_[i]);
    for (std::size_t p = 0; p < n; ++p) params_(static_cast<Eigen::Index>(offsets_[i] + p)) = dist(rng);
  }
}

int Encoder::input_dim() const noexcept { return layers_.empty() ? 0 : layer_input_dim(layers_.front()); }
int Encoder::output_dim() const noexcept { return layers_.empty() ? 0 : layer_output_dim(layers_.back()); }

MatrixXd Encoder::forward(const MatrixXd& X) const {
  Tape tape;
  return forward(X, tape);
}

MatrixXd Encoder::forward(const MatrixXd& X, Tape& tape) const {
  if (X.rows() != input_dim()) {
    shape_error("input has " + std::to_string(X.rows()) + " rows, encoder expects " + std::to_string(input_dim()));
  }
  tape.inputs.clear();
  tape.pre.clear();
  MatrixXd cur = X;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const double* base = params_.data() + offsets_[i];
    tape.inputs.push_back(cur);
    if (const auto* d = std::get_if<DenseSpec>(&layers_[i])) {
      Eigen::Map<const MatrixXd> W(base, d->out, d->in);
      Eigen::Map<const VectorXd> b(base + static_cast<std::size_t>(d->out) * static_cast<std::size_t>(d->in), d->out);
      MatrixXd Z = W * cur;
      Z.colwise() += b;
      cur = apply_act(d->act, Z);
      tape.pre.push_back(std::move(Z));
    } else {
      const auto& c = std::get<CircularConvSpec>(layers_[i]);
      const int L = c.length, F = c.filters, LC = c.length * c.channels;
      Eigen::Map<const MatrixXd> Theta(base, F, LC);
      Eigen::Map<const Eigen::RowVectorXd> b(base + static_cast<std::size_t>(F) * static_cast<std::size_t>(LC), F);
      MatrixXd V(L, F * cur.cols());
      MatrixXd out(F, cur.cols());
      for (Eigen::Index s = 0; s < cur.cols(); ++s) {
        MatrixXd v = circulant_patches(cur.col(s), L, c.channels) * Theta.transpose();
        v.rowwise() += b;
        out.col(s) = apply_act(c.act, v).colwise().mean().transpose();
        V.middleCols(s * F, F) = v;
      }
      cur = std::move(out);
      tape.pre.push_back(std::move(V));
    }
  }
  tape.output = cur;
  return cur;
}

VectorXd Encoder::backward(const Tape& tape, const MatrixXd& dOut, MatrixXd* dX) const {
  if (dOut.rows() != output_dim() || dOut.cols() != tape.output.cols()) shape_error("gradient shape mismatch");
  VectorXd grad = VectorXd::Zero(params_.size());
  MatrixXd dA = dOut;
  for (std::size_t li = layers_.size(); li-- > 0;) {
    const double* base = params_.data() + offsets_[li];
    double* gbase = grad.data() + offsets_[li];
    const MatrixXd& in = tape.inputs[li];
    if (const auto* d = std::get_if<DenseSpec>(&layers_[li])) {
      Eigen::Map<const MatrixXd> W(base, d->out, d->in);
      const MatrixXd dZ = dA.cwiseProduct(act_grad(d->act, tape.pre[li]));
      Eigen::Map<MatrixXd>(gbase, d->out, d->in) = dZ * in.transpose();
      Eigen::Map<VectorXd>(gbase + static_cast<std::size_t>(d->out) * static_cast<std::size_t>(d->in), d->out) =
          dZ.rowwise().sum();
      if (li > 0 || dX) dA = W.transpose() * dZ;
    } else {
      const auto& c = std::get<CircularConvSpec>(layers_[li]);
      const int L = c.length, F = c.filters, LC = c.length * c.channels;
      Eigen::Map<const MatrixXd> Theta(base, F, LC);
      Eigen::Map<MatrixXd> gTheta(gbase, F, LC);
      Eigen::Map<Eigen::RowVectorXd> gb(gbase + static_cast<std::size_t>(F) * static_cast<std::size_t>(LC), F);
      MatrixXd dIn = MatrixXd::Zero(in.rows(), in.cols());
      for (Eigen::Index s = 0; s < in.cols(); ++s) {
        const MatrixXd v = tape.pre[li].middleCols(s * F, F);
        const Eigen::RowVectorXd pooled = dA.col(s).transpose() / static_cast<double>(L);
        const MatrixXd dV = act_grad(c.act, v).array().rowwise() * pooled.array();
        const MatrixXd P = circulant_patches(in.col(s), L, c.channels);
        gTheta += dV.transpose() * P;
        gb += dV.colwise().sum();
        if (dX) {
          const MatrixXd dP = dV * Theta;
          for (int sh = 0; sh < L; ++sh)
            for (int k = 0; k < L; ++k)
              for (int ch = 0; ch < c.channels; ++ch)
                dIn(((sh + k) % L) * c.channels + ch, s) += dP(sh, k * c.channels + ch);
        }
      }
      dA = std::move(dIn);
    }
  }
  if (dX) *dX = dA;
  return grad;
}

json Encoder::architecture_json() const {
  json layers = json::array();
  for (const auto& l : layers_) {
    if (const auto* d = std::get_if<DenseSpec>(&l)) {
      layers.push_back({{"type", "dense"}, {"in", d->in}, {"out", d->out}, {"activation", activation_name(d->act)}});
    } else {
      const auto& c = std::get<CircularConvSpec>(l);
      layers.push_back({{"type", "circular-conv"},
                        {"length", c.length},
                        {"channels", c.channels},
                        {"filters", c.filters},
                        {"activation", activation_name(c.act)}});
    }
  }
  return json{{"layers", layers}};
}

Encoder Encoder::from_architecture_json(const json& j) {
  std::vector<LayerSpec> layers;
  try {
    for (const auto& l : j.at("layers")) {
      const std::string type = l.at("type").get<std::string>();
      if (type == "dense") {
        layers.push_back(DenseSpec{l.at("in").get<int>(), l.at("out").get<int>(),
                                   activation_from_name(l.at("activation").get<std::string>())});
      } else if (type == "circular-conv") {
        layers.push_back(CircularConvSpec{l.at("length").get<int>(), l.at("channels").get<int>(),
                                          l.at("filters").get<int>(),
                                          activation_from_name(l.at("activation").get<std::string>())});
      } else {
        throw Error(Errc::FormatError, "unknown layer type " + type);
      }
    }
  } catch (const json::exception& e) {
    throw Error(Errc::FormatError, e.what());
  }
  return Encoder(std::move(layers));
}

Encoder make_mlp(int input_dim, int embedding_dim, std::vector<int> hidden, Activation act) {
  std::vector<LayerSpec> layers;
  int in = input_dim;
  for (int h : hidden) {
    layers.push_back(DenseSpec{in, h, act});
    in = h;
  }
  layers.push_back(DenseSpec{in, embedding_dim, Activation::Identity});
  return Encoder(std::move(layers));
}

Encoder make_circular_cnn(int length, int channels, int filters, int embedding_dim, std::vector<int> hidden) {
  std::vector<LayerSpec> layers{CircularConvSpec{length, channels, filters, Activation::LeakyRelu}};
  int in = filters;
  for (int h : hidden) {
    layers.push_back(DenseSpec{in, h, Activation::Tanh});
    in = h;
  }
  layers.push_back(DenseSpec{in, embedding_dim, Activation::Identity});
  return Encoder(std::move(layers));
}

void adam_step(AdamState& st, VectorXd& params, const VectorXd& grad) {
  if (grad.size() != params.size()) shape_error("gradient and parameter sizes differ");
  if (st.m.size() == 0) {
    st.m = VectorXd::Zero(params.size());
    st.v = VectorXd::Zero(params.size());
  }
  if (st.m.size() != params.size() || st.v.size() != params.size()) shape_error("Adam moments do not match parameters");
  ++st.step;
  st.m = st.beta1 * st.m + (1.0 - st.beta1) * grad;
  st.v = st.beta2 * st.v + (1.0 - st.beta2) * grad.cwiseProduct(grad);
  const double c1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.step));
  const double c2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.step));
  params.array() -= st.lr * (st.m.array() / c1) / ((st.v.array() / c2).sqrt() + st.eps);
}

namespace {

json encoding_to_json(const InputEncoding& e) {
  return json{{"scheme", scheme_name(e.scheme)},
              {"length", e.length},
              {"n_strands", e.n_strands},
              {"scaler", {{"mean", e.scaler.mean}, {"stddev", e.scaler.stddev}}}};
}

InputEncoding encoding_from_json(const json& j) {
  InputEncoding e;
  e.scheme = scheme_from_name(j.at("scheme").get<std::string>());
  e.length = j.at("length").get<int>();
  e.n_strands = j.at("n_strands").get<int>();
  e.scaler.mean = j.at("scaler").at("mean").get<double>();
  e.scaler.stddev = j.at("scaler").at("stddev").get<double>();
  return e;
}

void put_u64_le(std::ostream& out, std::uint64_t v) {
  char bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(bytes, 8);
}

std::uint64_t get_u64_le(std::istream& in) {
  unsigned char bytes[8];
  in.read(reinterpret_cast<char*>(bytes), 8);
  if (!in) throw Error(Errc::FormatError, "truncated checkpoint");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
  return v;
}

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  json header{{"format", "bf-ckpt-1"},
              {"architecture", ckpt.encoder.architecture_json()},
              {"encoding", encoding_to_json(ckpt.encoding)},
              {"param_count", ckpt.encoder.param_count()},
              {"meta", ckpt.meta}};
  const std::string text = header.dump();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::FormatError, "cannot open " + path + " for writing");
  out.write(kCheckpointMagic, static_cast<std::streamsize>(std::strlen(kCheckpointMagic)));
  put_u64_le(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (Eigen::Index i = 0; i < ckpt.encoder.parameters().size(); ++i)
    put_u64_le(out, std::bit_cast<std::uint64_t>(ckpt.encoder.parameters()(i)));
  if (!out) throw Error(Errc::FormatError, "write failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::FormatError, "cannot open " + path);
  std::string magic(std::strlen(kCheckpointMagic), '\0');
  in.read(magic.data(), static_cast<std::streamsize>(magic.size()));
  if (!in || magic != kCheckpointMagic) throw Error(Errc::FormatError, path + " is not a bf-ckpt-1 file");
  const std::uint64_t len = get_u64_le(in);
  if (len > (std::uint64_t{1} << 30)) throw Error(Errc::FormatError, "implausible header length");
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  if (!in) throw Error(Errc::FormatError, "truncated checkpoint header");
  Checkpoint ckpt;
  try {
    const json header = json::parse(text);
    ckpt.encoder = Encoder::from_architecture_json(header.at("architecture"));
    ckpt.encoding = encoding_from_json(header.at("encoding"));
    ckpt.meta = header.value("meta", json::object());
    if (header.at("param_count").get<std::size_t>() != ckpt.encoder.param_count()) {
      throw Error(Errc::FormatError, "parameter count does not match architecture");
    }
  } catch (const json::exception& e) {
    throw Error(Errc::FormatError, e.what());
  }
  for (Eigen::Index i = 0; i < ckpt.encoder.parameters().size(); ++i)
    ckpt.encoder.parameters()(i) = std::bit_cast<double>(get_u64_le(in));
  return ckpt;
}

}  // namespace braidforge
