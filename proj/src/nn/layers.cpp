#include "ccpt/nn/layers.hpp"

#include <cmath>
#include <sstream>

namespace ccpt::nn {

namespace {

void expect(bool ok, const std::string& what) {
  if (!ok) throw ShapeError(what);
}

void uniform_fill(Tensor& t, Rng& rng, double bound) {
  for (double& v : t.data) v = rng.uniform(-bound, bound);
}

}  // namespace

Tensor Layer::tangent(const Tensor&, const Tensor&) const {
  throw ShapeError("layer '" + descriptor() + "' has no tangent support");
}

void Layer::tangent_param_grads(const Tensor&, const Tensor&, std::span<Tensor>) const {}

// ---------------------------------------------------------------- Dense

Dense::Dense(int in, int out, double init_gain)
    : in_(in), out_(out), init_gain_(init_gain), weight_({out, in}), bias_({out}) {}

std::string Dense::descriptor() const {
  return "dense(" + std::to_string(in_) + "," + std::to_string(out_) + ")";
}

Shape Dense::output_shape(const Shape& in) const {
  expect(static_cast<int>(shape_size(in)) == in_, "dense: expected " + std::to_string(in_) + " inputs, got " +
                                                      shape_string(in));
  return {out_};
}

Tensor Dense::forward(const Tensor& x) const {
  expect(static_cast<int>(x.row_size()) == in_, "dense forward: input width " + std::to_string(x.row_size()) +
                                                    " != " + std::to_string(in_));
  const int batch = x.batch();
  Tensor y({batch, out_});
  for (int b = 0; b < batch; ++b) {
    const double* xr = x.row(b);
    double* yr = y.row(b);
    for (int o = 0; o < out_; ++o) {
      const double* w = weight_.data.data() + static_cast<std::size_t>(o) * in_;
      double acc = bias_[o];
      for (int i = 0; i < in_; ++i) acc += w[i] * xr[i];
      yr[o] = acc;
    }
  }
  return y;
}

Tensor Dense::backward(const Tensor& x, const Tensor&, const Tensor& gy, std::span<Tensor> grads) const {
  const int batch = x.batch();
  Tensor& gw = grads[0];
  Tensor& gb = grads[1];
  Tensor gx(x.shape);
  for (int b = 0; b < batch; ++b) {
    const double* xr = x.row(b);
    const double* gr = gy.row(b);
    double* gxr = gx.row(b);
    for (int o = 0; o < out_; ++o) {
      const double g = gr[o];
      if (g == 0.0) continue;
      gb[o] += g;
      const double* w = weight_.data.data() + static_cast<std::size_t>(o) * in_;
      double* gwr = gw.data.data() + static_cast<std::size_t>(o) * in_;
      for (int i = 0; i < in_; ++i) {
        gwr[i] += g * xr[i];
        gxr[i] += g * w[i];
      }
    }
  }
  return gx;
}

Tensor Dense::tangent(const Tensor& x, const Tensor& sx) const {
  (void)x;
  const int batch = sx.batch();
  Tensor sy({batch, out_});
  for (int b = 0; b < batch; ++b) {
    const double* sr = sx.row(b);
    double* yr = sy.row(b);
    for (int o = 0; o < out_; ++o) {
      const double* w = weight_.data.data() + static_cast<std::size_t>(o) * in_;
      double acc = 0.0;
      for (int i = 0; i < in_; ++i) acc += w[i] * sr[i];
      yr[o] = acc;
    }
  }
  return sy;
}

void Dense::tangent_param_grads(const Tensor& gy, const Tensor& sx, std::span<Tensor> grads) const {
  Tensor& gw = grads[0];
  for (int b = 0; b < sx.batch(); ++b) {
    const double* sr = sx.row(b);
    const double* gr = gy.row(b);
    for (int o = 0; o < out_; ++o) {
      const double g = gr[o];
      if (g == 0.0) continue;
      double* gwr = gw.data.data() + static_cast<std::size_t>(o) * in_;
      for (int i = 0; i < in_; ++i) gwr[i] += g * sr[i];
    }
  }
}

std::vector<NamedParam> Dense::params() { return {{"weight", &weight_}, {"bias", &bias_}}; }

void Dense::init(Rng& rng) {
  // He-style uniform bound for ReLU trunks, scaled by the gain.
  uniform_fill(weight_, rng, init_gain_ * std::sqrt(6.0 / in_));
  bias_.fill(0.0);
}

// ---------------------------------------------------------------- activations

Tensor Relu::forward(const Tensor& x) const {
  Tensor y(x.shape);
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
  return y;
}

Tensor Relu::backward(const Tensor& x, const Tensor&, const Tensor& gy, std::span<Tensor>) const {
  Tensor gx(x.shape);
  for (std::size_t i = 0; i < x.size(); ++i) gx[i] = x[i] > 0.0 ? gy[i] : 0.0;
  return gx;
}

Tensor Relu::tangent(const Tensor& x, const Tensor& sx) const {
  Tensor sy(x.shape);
  for (std::size_t i = 0; i < x.size(); ++i) sy[i] = x[i] > 0.0 ? sx[i] : 0.0;
  return sy;
}

Tensor Tanh::forward(const Tensor& x) const {
  Tensor y(x.shape);
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = std::tanh(x[i]);
  return y;
}

Tensor Tanh::backward(const Tensor&, const Tensor& y, const Tensor& gy, std::span<Tensor>) const {
  Tensor gx(y.shape);
  for (std::size_t i = 0; i < y.size(); ++i) gx[i] = gy[i] * (1.0 - y[i] * y[i]);
  return gx;
}

// ---------------------------------------------------------------- CodeEmbedding

namespace {

int code_at(double v, int codes) {
  const int c = static_cast<int>(v);
  if (c < 0 || c >= codes || static_cast<double>(c) != v) {
    throw ShapeError("categorical input " + std::to_string(v) + " outside [0," + std::to_string(codes) + ")");
  }
  return c;
}

}  // namespace

CodeEmbedding::CodeEmbedding(int codes, int dim) : codes_(codes), dim_(dim), table_({codes, dim}) {}

std::string CodeEmbedding::descriptor() const {
  return "embed(" + std::to_string(codes_) + "," + std::to_string(dim_) + ")";
}

Shape CodeEmbedding::output_shape(const Shape& in) const {
  Shape out{dim_};
  out.insert(out.end(), in.begin(), in.end());
  return out;
}

Tensor CodeEmbedding::forward(const Tensor& x) const {
  const int batch = x.batch();
  const std::size_t cells = x.row_size();
  Shape s = x.shape;
  s.insert(s.begin() + 1, dim_);
  Tensor y(s);
  for (int b = 0; b < batch; ++b) {
    const double* xr = x.row(b);
    double* yr = y.row(b);
    for (std::size_t p = 0; p < cells; ++p) {
      const int c = code_at(xr[p], codes_);
      for (int d = 0; d < dim_; ++d) yr[static_cast<std::size_t>(d) * cells + p] = table_[c * dim_ + d];
    }
  }
  return y;
}

Tensor CodeEmbedding::backward(const Tensor& x, const Tensor&, const Tensor& gy, std::span<Tensor> grads) const {
  Tensor& gt = grads[0];
  const std::size_t cells = x.row_size();
  for (int b = 0; b < x.batch(); ++b) {
    const double* xr = x.row(b);
    const double* gr = gy.row(b);
    for (std::size_t p = 0; p < cells; ++p) {
      const int c = static_cast<int>(xr[p]);
      for (int d = 0; d < dim_; ++d) gt[c * dim_ + d] += gr[static_cast<std::size_t>(d) * cells + p];
    }
  }
  return {};
}

std::vector<NamedParam> CodeEmbedding::params() { return {{"table", &table_}}; }

void CodeEmbedding::init(Rng& rng) { uniform_fill(table_, rng, 1.0); }

// ---------------------------------------------------------------- Conv3d

Conv3d::Conv3d(Conv3dSpec spec)
    : spec_(spec),
      weight_({spec.out_channels, spec.in_channels, spec.kernel, spec.kernel, spec.kernel}),
      bias_({spec.out_channels}) {}

std::string Conv3d::descriptor() const {
  std::ostringstream os;
  os << "conv3d(" << spec_.in_channels << "," << spec_.out_channels << ",k" << spec_.kernel << ",s" << spec_.stride
     << ",p" << spec_.padding << ")";
  return os.str();
}

Shape Conv3d::output_shape(const Shape& in) const {
  expect(in.size() == 4 && in[0] == spec_.in_channels, "conv3d: expected [" + std::to_string(spec_.in_channels) +
                                                           ",D,H,W], got " + shape_string(in));
  Shape out{spec_.out_channels, spec_.out_extent(in[1]), spec_.out_extent(in[2]), spec_.out_extent(in[3])};
  expect(out[1] > 0 && out[2] > 0 && out[3] > 0, "conv3d: input too small " + shape_string(in));
  return out;
}

Tensor Conv3d::correlate(const Tensor& x, bool with_bias) const {
  const Shape in = x.sample_shape();
  const Shape os = output_shape(in);
  const int batch = x.batch();
  const int C = spec_.in_channels, O = spec_.out_channels, K = spec_.kernel, S = spec_.stride, P = spec_.padding;
  const int D = in[1], H = in[2], W = in[3];
  const int OD = os[1], OH = os[2], OW = os[3];
  Tensor y({batch, O, OD, OH, OW});
  const std::size_t in_plane = static_cast<std::size_t>(D) * H * W;
  const std::size_t out_plane = static_cast<std::size_t>(OD) * OH * OW;
  for (int b = 0; b < batch; ++b) {
    const double* xr = x.row(b);
    double* yr = y.row(b);
    for (int o = 0; o < O; ++o) {
      double* yo = yr + o * out_plane;
      for (int od = 0; od < OD; ++od) {
        for (int oh = 0; oh < OH; ++oh) {
          for (int ow = 0; ow < OW; ++ow) {
            double acc = with_bias ? bias_[o] : 0.0;
            for (int c = 0; c < C; ++c) {
              const double* xc = xr + c * in_plane;
              const double* wk = weight_.data.data() + (static_cast<std::size_t>(o) * C + c) * K * K * K;
              for (int kd = 0; kd < K; ++kd) {
                const int id = od * S + kd - P;
                if (id < 0 || id >= D) continue;
                for (int kh = 0; kh < K; ++kh) {
                  const int ih = oh * S + kh - P;
                  if (ih < 0 || ih >= H) continue;
                  const double* xrow = xc + (static_cast<std::size_t>(id) * H + ih) * W;
                  const double* wrow = wk + (kd * K + kh) * K;
                  for (int kw = 0; kw < K; ++kw) {
                    const int iw = ow * S + kw - P;
                    if (iw < 0 || iw >= W) continue;
                    acc += wrow[kw] * xrow[iw];
                  }
                }
              }
            }
            yo[(static_cast<std::size_t>(od) * OH + oh) * OW + ow] = acc;
          }
        }
      }
    }
  }
  return y;
}

Tensor Conv3d::forward(const Tensor& x) const { return correlate(x, true); }

Tensor Conv3d::tangent(const Tensor&, const Tensor& sx) const { return correlate(sx, false); }

void Conv3d::accumulate_weight_grad(const Tensor& x, const Tensor& gy, Tensor& gw) const {
  const Shape in = x.sample_shape();
  const int C = spec_.in_channels, O = spec_.out_channels, K = spec_.kernel, S = spec_.stride, P = spec_.padding;
  const int D = in[1], H = in[2], W = in[3];
  const int OD = gy.shape[2], OH = gy.shape[3], OW = gy.shape[4];
  const std::size_t in_plane = static_cast<std::size_t>(D) * H * W;
  const std::size_t out_plane = static_cast<std::size_t>(OD) * OH * OW;
  for (int b = 0; b < x.batch(); ++b) {
    const double* xr = x.row(b);
    const double* gr = gy.row(b);
    for (int o = 0; o < O; ++o) {
      for (int od = 0; od < OD; ++od) {
        for (int oh = 0; oh < OH; ++oh) {
          for (int ow = 0; ow < OW; ++ow) {
            const double g = gr[o * out_plane + (static_cast<std::size_t>(od) * OH + oh) * OW + ow];
            if (g == 0.0) continue;
            for (int c = 0; c < C; ++c) {
              const double* xc = xr + c * in_plane;
              double* wk = gw.data.data() + (static_cast<std::size_t>(o) * C + c) * K * K * K;
              for (int kd = 0; kd < K; ++kd) {
                const int id = od * S + kd - P;
                if (id < 0 || id >= D) continue;
                for (int kh = 0; kh < K; ++kh) {
                  const int ih = oh * S + kh - P;
                  if (ih < 0 || ih >= H) continue;
                  const double* xrow = xc + (static_cast<std::size_t>(id) * H + ih) * W;
                  double* wrow = wk + (kd * K + kh) * K;
                  for (int kw = 0; kw < K; ++kw) {
                    const int iw = ow * S + kw - P;
                    if (iw < 0 || iw >= W) continue;
                    wrow[kw] += g * xrow[iw];
                  }
                }
              }
            }
          }
        }
      }
    }
  }
}

Tensor Conv3d::backward(const Tensor& x, const Tensor&, const Tensor& gy, std::span<Tensor> grads) const {
  const Shape in = x.sample_shape();
  const int C = spec_.in_channels, O = spec_.out_channels, K = spec_.kernel, S = spec_.stride, P = spec_.padding;
  const int D = in[1], H = in[2], W = in[3];
  const int OD = gy.shape[2], OH = gy.shape[3], OW = gy.shape[4];
  const std::size_t in_plane = static_cast<std::size_t>(D) * H * W;
  const std::size_t out_plane = static_cast<std::size_t>(OD) * OH * OW;

  accumulate_weight_grad(x, gy, grads[0]);
  Tensor& gb = grads[1];
  Tensor gx(x.shape);
  for (int b = 0; b < x.batch(); ++b) {
    const double* gr = gy.row(b);
    double* gxr = gx.row(b);
    for (int o = 0; o < O; ++o) {
      for (int od = 0; od < OD; ++od) {
        for (int oh = 0; oh < OH; ++oh) {
          for (int ow = 0; ow < OW; ++ow) {
            const double g = gr[o * out_plane + (static_cast<std::size_t>(od) * OH + oh) * OW + ow];
            if (g == 0.0) continue;
            gb[o] += g;
            for (int c = 0; c < C; ++c) {
              double* gxc = gxr + c * in_plane;
              const double* wk = weight_.data.data() + (static_cast<std::size_t>(o) * C + c) * K * K * K;
              for (int kd = 0; kd < K; ++kd) {
                const int id = od * S + kd - P;
                if (id < 0 || id >= D) continue;
                for (int kh = 0; kh < K; ++kh) {
                  const int ih = oh * S + kh - P;
                  if (ih < 0 || ih >= H) continue;
                  double* grow = gxc + (static_cast<std::size_t>(id) * H + ih) * W;
                  const double* wrow = wk + (kd * K + kh) * K;
                  for (int kw = 0; kw < K; ++kw) {
                    const int iw = ow * S + kw - P;
                    if (iw < 0 || iw >= W) continue;
                    grow[iw] += g * wrow[kw];
                  }
                }
              }
            }
          }
        }
      }
    }
  }
  return gx;
}

void Conv3d::tangent_param_grads(const Tensor& gy, const Tensor& sx, std::span<Tensor> grads) const {
  accumulate_weight_grad(sx, gy, grads[0]);
}

std::vector<NamedParam> Conv3d::params() { return {{"weight", &weight_}, {"bias", &bias_}}; }

void Conv3d::init(Rng& rng) {
  const int fan_in = spec_.in_channels * spec_.kernel * spec_.kernel * spec_.kernel;
  uniform_fill(weight_, rng, std::sqrt(6.0 / fan_in));
  bias_.fill(0.0);
}

// ---------------------------------------------------------------- CodeConv3d

CodeConv3d::CodeConv3d(int codes, int embed_dim, Conv3dSpec spec)
    : codes_(codes),
      dim_(embed_dim),
      spec_(spec),
      table_({codes, embed_dim}),
      weight_({spec.out_channels, embed_dim, spec.kernel, spec.kernel, spec.kernel}),
      bias_({spec.out_channels}) {
  spec_.in_channels = embed_dim;
}

std::string CodeConv3d::descriptor() const {
  std::ostringstream os;
  os << "codeconv3d(" << codes_ << "," << dim_ << "," << spec_.out_channels << ",k" << spec_.kernel << ",s"
     << spec_.stride << ",p" << spec_.padding << ")";
  return os.str();
}

Shape CodeConv3d::output_shape(const Shape& in) const {
  expect(in.size() == 3, "codeconv3d: expected [D,H,W] codes, got " + shape_string(in));
  return {spec_.out_channels, spec_.out_extent(in[0]), spec_.out_extent(in[1]), spec_.out_extent(in[2])};
}

std::vector<double> CodeConv3d::lookup() const {
  const int K3 = spec_.kernel * spec_.kernel * spec_.kernel;
  const int O = spec_.out_channels;
  std::vector<double> lut(static_cast<std::size_t>(codes_) * K3 * O, 0.0);
  for (int code = 0; code < codes_; ++code) {
    for (int c = 0; c < dim_; ++c) {
      const double e = std::tanh(table_[code * dim_ + c]);
      for (int o = 0; o < O; ++o) {
        const double* wk = weight_.data.data() + (static_cast<std::size_t>(o) * dim_ + c) * K3;
        for (int k = 0; k < K3; ++k) lut[(static_cast<std::size_t>(code) * K3 + k) * O + o] += wk[k] * e;
      }
    }
  }
  return lut;
}

Tensor CodeConv3d::forward(const Tensor& x) const {
  const Shape in = x.sample_shape();
  const Shape os = output_shape(in);
  const int K = spec_.kernel, S = spec_.stride, P = spec_.padding, O = spec_.out_channels;
  const int K3 = K * K * K;
  const int D = in[0], H = in[1], W = in[2];
  const int OD = os[1], OH = os[2], OW = os[3];
  const std::size_t out_plane = static_cast<std::size_t>(OD) * OH * OW;
  const std::vector<double> lut = lookup();
  Tensor y({x.batch(), O, OD, OH, OW});
  std::vector<double> acc(O);
  for (int b = 0; b < x.batch(); ++b) {
    const double* xr = x.row(b);
    double* yr = y.row(b);
    for (int od = 0; od < OD; ++od) {
      for (int oh = 0; oh < OH; ++oh) {
        for (int ow = 0; ow < OW; ++ow) {
          for (int o = 0; o < O; ++o) acc[o] = bias_[o];
          for (int kd = 0; kd < K; ++kd) {
            const int id = od * S + kd - P;
            if (id < 0 || id >= D) continue;
            for (int kh = 0; kh < K; ++kh) {
              const int ih = oh * S + kh - P;
              if (ih < 0 || ih >= H) continue;
              for (int kw = 0; kw < K; ++kw) {
                const int iw = ow * S + kw - P;
                if (iw < 0 || iw >= W) continue;
                const int code = code_at(xr[(static_cast<std::size_t>(id) * H + ih) * W + iw], codes_);
                const double* l = lut.data() + (static_cast<std::size_t>(code) * K3 + (kd * K + kh) * K + kw) * O;
                for (int o = 0; o < O; ++o) acc[o] += l[o];
              }
            }
          }
          const std::size_t p = (static_cast<std::size_t>(od) * OH + oh) * OW + ow;
          for (int o = 0; o < O; ++o) yr[o * out_plane + p] = acc[o];
        }
      }
    }
  }
  return y;
}

Tensor CodeConv3d::backward(const Tensor& x, const Tensor&, const Tensor& gy, std::span<Tensor> grads) const {
  const Shape in = x.sample_shape();
  const int K = spec_.kernel, S = spec_.stride, P = spec_.padding, O = spec_.out_channels;
  const int K3 = K * K * K;
  const int D = in[0], H = in[1], W = in[2];
  const int OD = gy.shape[2], OH = gy.shape[3], OW = gy.shape[4];
  const std::size_t out_plane = static_cast<std::size_t>(OD) * OH * OW;

  // Gradient with respect to the lookup table first, then chain to W and E.
  std::vector<double> glut(static_cast<std::size_t>(codes_) * K3 * O, 0.0);
  for (int b = 0; b < x.batch(); ++b) {
    const double* xr = x.row(b);
    const double* gr = gy.row(b);
    for (int od = 0; od < OD; ++od) {
      for (int oh = 0; oh < OH; ++oh) {
        for (int ow = 0; ow < OW; ++ow) {
          const std::size_t p = (static_cast<std::size_t>(od) * OH + oh) * OW + ow;
          for (int o = 0; o < O; ++o) grads[2][o] += gr[o * out_plane + p];
          for (int kd = 0; kd < K; ++kd) {
            const int id = od * S + kd - P;
            if (id < 0 || id >= D) continue;
            for (int kh = 0; kh < K; ++kh) {
              const int ih = oh * S + kh - P;
              if (ih < 0 || ih >= H) continue;
              for (int kw = 0; kw < K; ++kw) {
                const int iw = ow * S + kw - P;
                if (iw < 0 || iw >= W) continue;
                const int code = static_cast<int>(xr[(static_cast<std::size_t>(id) * H + ih) * W + iw]);
                double* g = glut.data() + (static_cast<std::size_t>(code) * K3 + (kd * K + kh) * K + kw) * O;
                for (int o = 0; o < O; ++o) g[o] += gr[o * out_plane + p];
              }
            }
          }
        }
      }
    }
  }
  Tensor& gtable = grads[0];
  Tensor& gw = grads[1];
  for (int code = 0; code < codes_; ++code) {
    for (int c = 0; c < dim_; ++c) {
      const double e = std::tanh(table_[code * dim_ + c]);
      double ge = 0.0;
      for (int o = 0; o < O; ++o) {
        const double* wk = weight_.data.data() + (static_cast<std::size_t>(o) * dim_ + c) * K3;
        double* gwk = gw.data.data() + (static_cast<std::size_t>(o) * dim_ + c) * K3;
        for (int k = 0; k < K3; ++k) {
          const double gl = glut[(static_cast<std::size_t>(code) * K3 + k) * O + o];
          gwk[k] += gl * e;
          ge += gl * wk[k];
        }
      }
      gtable[code * dim_ + c] += ge * (1.0 - e * e);
    }
  }
  return {};
}

std::vector<NamedParam> CodeConv3d::params() {
  return {{"table", &table_}, {"weight", &weight_}, {"bias", &bias_}};
}

void CodeConv3d::init(Rng& rng) {
  uniform_fill(table_, rng, 1.0);
  const int fan_in = dim_ * spec_.kernel * spec_.kernel * spec_.kernel;
  uniform_fill(weight_, rng, std::sqrt(6.0 / fan_in));
  bias_.fill(0.0);
}

// ---------------------------------------------------------------- CoordinateEmbedding

CoordinateEmbedding::CoordinateEmbedding(std::array<int, 3> extents, int dim) : extents_(extents), dim_(dim) {
  for (int a = 0; a < 3; ++a) tables_[a] = Tensor({extents[a] + 1, dim});
}

std::string CoordinateEmbedding::descriptor() const {
  std::ostringstream os;
  os << "coordembed(" << extents_[0] << "," << extents_[1] << "," << extents_[2] << "," << dim_ << ")";
  return os.str();
}

Shape CoordinateEmbedding::output_shape(const Shape& in) const {
  expect(shape_size(in) == 3, "coordembed: expected 3 coordinates");
  return {3 * dim_};
}

Tensor CoordinateEmbedding::forward(const Tensor& x) const {
  Tensor y({x.batch(), 3 * dim_});
  for (int b = 0; b < x.batch(); ++b) {
    for (int a = 0; a < 3; ++a) {
      const int c = code_at(x.row(b)[a], extents_[a] + 1);
      std::copy_n(tables_[a].data.data() + static_cast<std::size_t>(c) * dim_, dim_, y.row(b) + a * dim_);
    }
  }
  return y;
}

Tensor CoordinateEmbedding::backward(const Tensor& x, const Tensor&, const Tensor& gy, std::span<Tensor> grads) const {
  for (int b = 0; b < x.batch(); ++b) {
    for (int a = 0; a < 3; ++a) {
      const int c = static_cast<int>(x.row(b)[a]);
      for (int d = 0; d < dim_; ++d) grads[a][static_cast<std::size_t>(c) * dim_ + d] += gy.row(b)[a * dim_ + d];
    }
  }
  return {};
}

std::vector<NamedParam> CoordinateEmbedding::params() {
  return {{"x_table", &tables_[0]}, {"y_table", &tables_[1]}, {"z_table", &tables_[2]}};
}

void CoordinateEmbedding::init(Rng& rng) {
  for (Tensor& t : tables_) uniform_fill(t, rng, 1.0);
}

}  // namespace ccpt::nn
