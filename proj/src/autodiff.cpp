#include "glar/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "glar/errors.hpp"

namespace glar::ad {

namespace {

std::string shape_str(const std::vector<int>& s) {
  std::ostringstream os;
  os << "{";
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << "}";
  return os.str();
}

double sigmoid_stable(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double softplus_stable(double x) {
  if (x > 0.0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

void check_finite(const Tensor& t, const char* op) {
  for (double v : t.data) {
    if (!std::isfinite(v)) {
      throw NumericError(std::string("autodiff: non-finite result in ") + op);
    }
  }
}

// Lower-triangular Cholesky factor of symmetric A; throws naming the failing
// pivot when A is not positive definite.
std::vector<double> cholesky(const std::vector<double>& a, int d) {
  std::vector<double> l(static_cast<std::size_t>(d) * d, 0.0);
  for (int j = 0; j < d; ++j) {
    double diag = a[static_cast<std::size_t>(j) * d + j];
    for (int k = 0; k < j; ++k) {
      const double v = l[static_cast<std::size_t>(j) * d + k];
      diag -= v * v;
    }
    if (!(diag > 0.0) || !std::isfinite(diag)) {
      std::ostringstream os;
      os << "solve_spd: matrix not positive definite at pivot " << j;
      throw NumericError(os.str());
    }
    const double ljj = std::sqrt(diag);
    l[static_cast<std::size_t>(j) * d + j] = ljj;
    for (int i = j + 1; i < d; ++i) {
      double v = a[static_cast<std::size_t>(i) * d + j];
      for (int k = 0; k < j; ++k) {
        v -= l[static_cast<std::size_t>(i) * d + k] * l[static_cast<std::size_t>(j) * d + k];
      }
      l[static_cast<std::size_t>(i) * d + j] = v / ljj;
    }
  }
  return l;
}

// Solves L L^T x = b given the Cholesky factor.
std::vector<double> cholesky_solve(const std::vector<double>& l, int d, const std::vector<double>& b) {
  std::vector<double> y(b);
  for (int i = 0; i < d; ++i) {
    double v = y[static_cast<std::size_t>(i)];
    for (int k = 0; k < i; ++k) v -= l[static_cast<std::size_t>(i) * d + k] * y[static_cast<std::size_t>(k)];
    y[static_cast<std::size_t>(i)] = v / l[static_cast<std::size_t>(i) * d + i];
  }
  for (int i = d - 1; i >= 0; --i) {
    double v = y[static_cast<std::size_t>(i)];
    for (int k = i + 1; k < d; ++k) v -= l[static_cast<std::size_t>(k) * d + i] * y[static_cast<std::size_t>(k)];
    y[static_cast<std::size_t>(i)] = v / l[static_cast<std::size_t>(i) * d + i];
  }
  return y;
}

}  // namespace

const Tensor& Value::tensor() const { return tape_->value_of(id_); }
const std::vector<int>& Value::shape() const { return tensor().shape; }
bool Value::requires_grad() const { return tape_->node(id_).requires_grad; }

Value Tape::push(OpKind kind, Tensor value, std::vector<int> parents, PullFn pull) {
  bool req = false;
  for (int p : parents) req = req || nodes_[static_cast<std::size_t>(p)].requires_grad;
  Node n;
  n.kind = kind;
  n.value = std::move(value);
  n.requires_grad = req;
  n.parents = std::move(parents);
  if (req) n.pull = std::move(pull);
  nodes_.push_back(std::move(n));
  return Value(this, static_cast<int>(nodes_.size()) - 1);
}

Value Tape::constant(Tensor t) {
  Node n;
  n.kind = OpKind::leaf;
  n.value = std::move(t);
  n.requires_grad = false;
  nodes_.push_back(std::move(n));
  return Value(this, static_cast<int>(nodes_.size()) - 1);
}

Value Tape::param(Tensor t) {
  Node n;
  n.kind = OpKind::leaf;
  n.value = std::move(t);
  n.requires_grad = true;
  nodes_.push_back(std::move(n));
  return Value(this, static_cast<int>(nodes_.size()) - 1);
}

void Tape::accumulate(int id, const Tensor& contribution) {
  Tensor& slot = adjoints_[static_cast<std::size_t>(id)];
  if (slot.shape.empty()) {
    slot = contribution;
    return;
  }
  for (std::size_t i = 0; i < slot.data.size(); ++i) slot.data[i] += contribution.data[i];
}

void Tape::accumulate_broadcast(int id, const Tensor& contribution) {
  const Tensor& pv = node(id).value;
  if (pv.same_shape(contribution)) {
    accumulate(id, contribution);
    return;
  }
  // parent is scalar, contribution is full-shaped: reduce by summation
  double s = 0.0;
  for (double v : contribution.data) s += v;
  accumulate(id, Tensor::scalar(s));
}

Value Tape::elementwise_binary(OpKind kind, Value a, Value b) {
  const Tensor& ta = node(a.id()).value;
  const Tensor& tb = node(b.id()).value;
  const bool a_scalar = ta.is_scalar();
  const bool b_scalar = tb.is_scalar();
  if (!a_scalar && !b_scalar && !ta.same_shape(tb)) {
    throw NumericError("autodiff: shape mismatch " + shape_str(ta.shape) + " vs " + shape_str(tb.shape));
  }
  const Tensor& shaped = a_scalar ? tb : ta;
  const std::size_t n = shaped.numel();
  Tensor out(shaped.shape, std::vector<double>(n));
  auto av = [&](std::size_t i) { return a_scalar ? ta.data[0] : ta.data[i]; };
  auto bv = [&](std::size_t i) { return b_scalar ? tb.data[0] : tb.data[i]; };

  switch (kind) {
    case OpKind::add:
      for (std::size_t i = 0; i < n; ++i) out.data[i] = av(i) + bv(i);
      break;
    case OpKind::sub:
      for (std::size_t i = 0; i < n; ++i) out.data[i] = av(i) - bv(i);
      break;
    case OpKind::mul:
      for (std::size_t i = 0; i < n; ++i) out.data[i] = av(i) * bv(i);
      break;
    case OpKind::div:
      for (std::size_t i = 0; i < n; ++i) {
        if (bv(i) == 0.0) throw NumericError("autodiff: division by exact zero");
        out.data[i] = av(i) / bv(i);
      }
      check_finite(out, "div");
      break;
    default:
      throw NumericError("autodiff: bad binary op");
  }

  const int aid = a.id(), bid = b.id(), oid = static_cast<int>(nodes_.size());
  PullFn pull;
  switch (kind) {
    case OpKind::add:
      pull = [aid, bid](Tape& t, const Tensor& g) {
        if (t.node(aid).requires_grad) t.accumulate_broadcast(aid, g);
        if (t.node(bid).requires_grad) t.accumulate_broadcast(bid, g);
      };
      break;
    case OpKind::sub:
      pull = [aid, bid](Tape& t, const Tensor& g) {
        if (t.node(aid).requires_grad) t.accumulate_broadcast(aid, g);
        if (t.node(bid).requires_grad) {
          Tensor ng = g;
          for (double& v : ng.data) v = -v;
          t.accumulate_broadcast(bid, ng);
        }
      };
      break;
    case OpKind::mul:
      pull = [aid, bid](Tape& t, const Tensor& g) {
        const Tensor& ta2 = t.node(aid).value;
        const Tensor& tb2 = t.node(bid).value;
        const bool as = ta2.is_scalar(), bs = tb2.is_scalar();
        if (t.node(aid).requires_grad) {
          Tensor ga = g;
          for (std::size_t i = 0; i < ga.data.size(); ++i) ga.data[i] *= bs ? tb2.data[0] : tb2.data[i];
          t.accumulate_broadcast(aid, ga);
        }
        if (t.node(bid).requires_grad) {
          Tensor gb = g;
          for (std::size_t i = 0; i < gb.data.size(); ++i) gb.data[i] *= as ? ta2.data[0] : ta2.data[i];
          t.accumulate_broadcast(bid, gb);
        }
      };
      break;
    case OpKind::div:
      pull = [aid, bid, oid](Tape& t, const Tensor& g) {
        const Tensor& tb2 = t.node(bid).value;
        const Tensor& res = t.node(oid).value;
        const bool bs = tb2.is_scalar();
        if (t.node(aid).requires_grad) {
          Tensor ga = g;
          for (std::size_t i = 0; i < ga.data.size(); ++i) ga.data[i] /= bs ? tb2.data[0] : tb2.data[i];
          t.accumulate_broadcast(aid, ga);
        }
        if (t.node(bid).requires_grad) {
          Tensor gb = g;
          for (std::size_t i = 0; i < gb.data.size(); ++i) {
            const double bvv = bs ? tb2.data[0] : tb2.data[i];
            gb.data[i] *= -res.data[i] / bvv;
          }
          t.accumulate_broadcast(bid, gb);
        }
      };
      break;
    default:
      break;
  }
  return push(kind, std::move(out), {aid, bid}, std::move(pull));
}

Value Tape::elementwise_unary(OpKind kind, Value a) {
  const Tensor& ta = node(a.id()).value;
  Tensor out(ta.shape, std::vector<double>(ta.numel()));
  for (std::size_t i = 0; i < ta.data.size(); ++i) {
    const double x = ta.data[i];
    double y = 0.0;
    switch (kind) {
      case OpKind::neg: y = -x; break;
      case OpKind::abs: y = std::abs(x); break;
      case OpKind::tanh: y = std::tanh(x); break;
      case OpKind::sigmoid: y = sigmoid_stable(x); break;
      case OpKind::relu: y = x > 0.0 ? x : 0.0; break;
      case OpKind::log:
        if (x <= 0.0) throw NumericError("autodiff: log of non-positive value");
        y = std::log(x);
        break;
      case OpKind::softplus: y = softplus_stable(x); break;
      default: throw NumericError("autodiff: bad unary op");
    }
    out.data[i] = y;
  }
  check_finite(out, "unary");

  const int aid = a.id(), oid = static_cast<int>(nodes_.size());
  PullFn pull = [aid, oid, kind](Tape& t, const Tensor& g) {
    if (!t.node(aid).requires_grad) return;
    const Tensor& x = t.node(aid).value;
    const Tensor& y = t.node(oid).value;
    Tensor ga = g;
    for (std::size_t i = 0; i < ga.data.size(); ++i) {
      double d = 0.0;
      switch (kind) {
        case OpKind::neg: d = -1.0; break;
        case OpKind::abs: d = x.data[i] > 0.0 ? 1.0 : (x.data[i] < 0.0 ? -1.0 : 0.0); break;
        case OpKind::tanh: d = 1.0 - y.data[i] * y.data[i]; break;
        case OpKind::sigmoid: d = y.data[i] * (1.0 - y.data[i]); break;
        case OpKind::relu: d = x.data[i] > 0.0 ? 1.0 : 0.0; break;
        case OpKind::log: d = 1.0 / x.data[i]; break;
        case OpKind::softplus: d = sigmoid_stable(x.data[i]); break;
        default: break;
      }
      ga.data[i] *= d;
    }
    t.accumulate(aid, ga);
  };
  return push(kind, std::move(out), {aid}, std::move(pull));
}

Value Tape::add(Value a, Value b) { return elementwise_binary(OpKind::add, a, b); }
Value Tape::sub(Value a, Value b) { return elementwise_binary(OpKind::sub, a, b); }
Value Tape::mul(Value a, Value b) { return elementwise_binary(OpKind::mul, a, b); }
Value Tape::div(Value a, Value b) { return elementwise_binary(OpKind::div, a, b); }
Value Tape::neg(Value a) { return elementwise_unary(OpKind::neg, a); }
Value Tape::abs(Value a) { return elementwise_unary(OpKind::abs, a); }
Value Tape::tanh(Value a) { return elementwise_unary(OpKind::tanh, a); }
Value Tape::sigmoid(Value a) { return elementwise_unary(OpKind::sigmoid, a); }
Value Tape::relu(Value a) { return elementwise_unary(OpKind::relu, a); }
Value Tape::log(Value a) { return elementwise_unary(OpKind::log, a); }
Value Tape::softplus(Value a) { return elementwise_unary(OpKind::softplus, a); }

Value Tape::scale(Value a, double c) {
  const Tensor& ta = node(a.id()).value;
  Tensor out = ta;
  for (double& v : out.data) v *= c;
  check_finite(out, "scale");
  const int aid = a.id();
  PullFn pull = [aid, c](Tape& t, const Tensor& g) {
    if (!t.node(aid).requires_grad) return;
    Tensor ga = g;
    for (double& v : ga.data) v *= c;
    t.accumulate(aid, ga);
  };
  return push(OpKind::scale, std::move(out), {aid}, std::move(pull));
}

Value Tape::matmul(Value a, Value b) {
  const Tensor& ta = node(a.id()).value;
  const Tensor& tb = node(b.id()).value;
  if (ta.shape.size() != 2 || tb.shape.size() != 2 || ta.cols() != tb.rows()) {
    throw NumericError("autodiff: matmul dimension mismatch " + shape_str(ta.shape) + " x " + shape_str(tb.shape));
  }
  const int m = ta.rows(), k = ta.cols(), n = tb.cols();
  Tensor out = Tensor::zeros({m, n});
  for (int i = 0; i < m; ++i) {
    for (int l = 0; l < k; ++l) {
      const double av = ta.data[static_cast<std::size_t>(i) * k + l];
      if (av == 0.0) continue;
      const double* brow = &tb.data[static_cast<std::size_t>(l) * n];
      double* orow = &out.data[static_cast<std::size_t>(i) * n];
      for (int j = 0; j < n; ++j) orow[j] += av * brow[j];
    }
  }
  check_finite(out, "matmul");

  const int aid = a.id(), bid = b.id();
  PullFn pull = [aid, bid, m, k, n](Tape& t, const Tensor& g) {
    const Tensor& ta2 = t.node(aid).value;
    const Tensor& tb2 = t.node(bid).value;
    if (t.node(aid).requires_grad) {
      // ga = g * b^T : ga[i,l] = sum_j g[i,j] b[l,j]
      Tensor ga = Tensor::zeros({m, k});
      for (int i = 0; i < m; ++i) {
        for (int l = 0; l < k; ++l) {
          const double* grow = &g.data[static_cast<std::size_t>(i) * n];
          const double* brow = &tb2.data[static_cast<std::size_t>(l) * n];
          double s = 0.0;
          for (int j = 0; j < n; ++j) s += grow[j] * brow[j];
          ga.data[static_cast<std::size_t>(i) * k + l] = s;
        }
      }
      t.accumulate(aid, ga);
    }
    if (t.node(bid).requires_grad) {
      // gb = a^T * g : gb[l,j] = sum_i a[i,l] g[i,j]
      Tensor gb = Tensor::zeros({k, n});
      for (int i = 0; i < m; ++i) {
        const double* grow = &g.data[static_cast<std::size_t>(i) * n];
        for (int l = 0; l < k; ++l) {
          const double av = ta2.data[static_cast<std::size_t>(i) * k + l];
          if (av == 0.0) continue;
          double* gbrow = &gb.data[static_cast<std::size_t>(l) * n];
          for (int j = 0; j < n; ++j) gbrow[j] += av * grow[j];
        }
      }
      t.accumulate(bid, gb);
    }
  };
  return push(OpKind::matmul, std::move(out), {aid, bid}, std::move(pull));
}

Value Tape::transpose(Value a) {
  const Tensor& ta = node(a.id()).value;
  if (ta.shape.size() != 2) throw NumericError("autodiff: transpose expects rank-2");
  const int m = ta.rows(), n = ta.cols();
  Tensor out = Tensor::zeros({n, m});
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) out.data[static_cast<std::size_t>(j) * m + i] = ta.data[static_cast<std::size_t>(i) * n + j];
  const int aid = a.id();
  PullFn pull = [aid, m, n](Tape& t, const Tensor& g) {
    if (!t.node(aid).requires_grad) return;
    Tensor ga = Tensor::zeros({m, n});
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < m; ++i) ga.data[static_cast<std::size_t>(i) * n + j] = g.data[static_cast<std::size_t>(j) * m + i];
    t.accumulate(aid, ga);
  };
  return push(OpKind::transpose, std::move(out), {aid}, std::move(pull));
}

Value Tape::concat_rows(std::span<const Value> parts) {
  if (parts.empty()) throw NumericError("autodiff: concat_rows of nothing");
  const int cols = node(parts[0].id()).value.cols();
  int rows = 0;
  std::vector<int> ids;
  ids.reserve(parts.size());
  for (const Value& p : parts) {
    const Tensor& tp = node(p.id()).value;
    if (tp.shape.size() != 2 || tp.cols() != cols) throw NumericError("autodiff: concat_rows column mismatch");
    rows += tp.rows();
    ids.push_back(p.id());
  }
  Tensor out = Tensor::zeros({rows, cols});
  std::size_t off = 0;
  for (int id : ids) {
    const Tensor& tp = node(id).value;
    std::copy(tp.data.begin(), tp.data.end(), out.data.begin() + static_cast<std::ptrdiff_t>(off));
    off += tp.data.size();
  }
  PullFn pull = [ids, cols](Tape& t, const Tensor& g) {
    std::size_t off2 = 0;
    for (int id : ids) {
      const Tensor& tp = t.node(id).value;
      const std::size_t len = tp.data.size();
      if (t.node(id).requires_grad) {
        Tensor gp(tp.shape, std::vector<double>(g.data.begin() + static_cast<std::ptrdiff_t>(off2),
                                                g.data.begin() + static_cast<std::ptrdiff_t>(off2 + len)));
        t.accumulate(id, gp);
      }
      off2 += len;
    }
  };
  return push(OpKind::concat_rows, std::move(out), std::move(ids), std::move(pull));
}

Value Tape::concat_cols(std::span<const Value> parts) {
  if (parts.empty()) throw NumericError("autodiff: concat_cols of nothing");
  const int rows = node(parts[0].id()).value.rows();
  int cols = 0;
  std::vector<int> ids;
  ids.reserve(parts.size());
  for (const Value& p : parts) {
    const Tensor& tp = node(p.id()).value;
    if (tp.shape.size() != 2 || tp.rows() != rows) throw NumericError("autodiff: concat_cols row mismatch");
    cols += tp.cols();
    ids.push_back(p.id());
  }
  Tensor out = Tensor::zeros({rows, cols});
  int coff = 0;
  for (int id : ids) {
    const Tensor& tp = node(id).value;
    const int pc = tp.cols();
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < pc; ++j)
        out.data[static_cast<std::size_t>(i) * cols + coff + j] = tp.data[static_cast<std::size_t>(i) * pc + j];
    coff += pc;
  }
  PullFn pull = [ids, rows, cols](Tape& t, const Tensor& g) {
    int coff2 = 0;
    for (int id : ids) {
      const Tensor& tp = t.node(id).value;
      const int pc = tp.cols();
      if (t.node(id).requires_grad) {
        Tensor gp = Tensor::zeros(tp.shape);
        for (int i = 0; i < rows; ++i)
          for (int j = 0; j < pc; ++j)
            gp.data[static_cast<std::size_t>(i) * pc + j] = g.data[static_cast<std::size_t>(i) * cols + coff2 + j];
        t.accumulate(id, gp);
      }
      coff2 += pc;
    }
  };
  return push(OpKind::concat_cols, std::move(out), std::move(ids), std::move(pull));
}

Value Tape::slice_rows(Value a, int row0, int nrows) {
  const Tensor& ta = node(a.id()).value;
  if (ta.shape.size() != 2 || row0 < 0 || nrows < 0 || row0 + nrows > ta.rows()) {
    throw NumericError("autodiff: slice_rows out of range");
  }
  const int cols = ta.cols();
  Tensor out(std::vector<int>{nrows, cols},
             std::vector<double>(ta.data.begin() + static_cast<std::ptrdiff_t>(row0) * cols,
                                 ta.data.begin() + static_cast<std::ptrdiff_t>(row0 + nrows) * cols));
  const int aid = a.id();
  PullFn pull = [aid, row0, nrows, cols](Tape& t, const Tensor& g) {
    if (!t.node(aid).requires_grad) return;
    Tensor ga = Tensor::zeros(t.node(aid).value.shape);
    std::copy(g.data.begin(), g.data.end(), ga.data.begin() + static_cast<std::ptrdiff_t>(row0) * cols);
    t.accumulate(aid, ga);
  };
  return push(OpKind::slice_rows, std::move(out), {aid}, std::move(pull));
}

Value Tape::reshape(Value a, std::vector<int> shape) {
  const Tensor& ta = node(a.id()).value;
  Tensor out(shape, ta.data);
  const int aid = a.id();
  PullFn pull = [aid](Tape& t, const Tensor& g) {
    if (!t.node(aid).requires_grad) return;
    Tensor ga(t.node(aid).value.shape, g.data);
    t.accumulate(aid, ga);
  };
  return push(OpKind::reshape, std::move(out), {aid}, std::move(pull));
}

Value Tape::sum(Value a) {
  const Tensor& ta = node(a.id()).value;
  double s = 0.0;
  for (double v : ta.data) s += v;
  const int aid = a.id();
  PullFn pull = [aid](Tape& t, const Tensor& g) {
    if (!t.node(aid).requires_grad) return;
    Tensor ga = Tensor::full(t.node(aid).value.shape, g.data[0]);
    t.accumulate(aid, ga);
  };
  return push(OpKind::sum, Tensor::scalar(s), {aid}, std::move(pull));
}

Value Tape::solve_spd(Value a, Value b, double sym_tol) {
  const Tensor& ta = node(a.id()).value;
  const Tensor& tb = node(b.id()).value;
  if (ta.shape.size() != 2 || ta.rows() != ta.cols()) throw NumericError("solve_spd: A must be square");
  const int d = ta.rows();
  if (tb.rows() != d || tb.cols() != 1) throw NumericError("solve_spd: b must be d x 1");

  const double tol = sym_tol * std::max(1.0, ta.max_abs());
  for (int i = 0; i < d; ++i) {
    for (int j = i + 1; j < d; ++j) {
      if (std::abs(ta.at(i, j) - ta.at(j, i)) > tol) {
        throw NumericError("solve_spd: matrix not symmetric within tolerance");
      }
    }
  }
  std::vector<double> sym(static_cast<std::size_t>(d) * d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) sym[static_cast<std::size_t>(i) * d + j] = 0.5 * (ta.at(i, j) + ta.at(j, i));

  auto factor = cholesky(sym, d);
  Tensor out({d, 1}, cholesky_solve(factor, d, tb.data));
  check_finite(out, "solve_spd");

  const int aid = a.id(), bid = b.id(), oid = static_cast<int>(nodes_.size());
  PullFn pull = [aid, bid, oid, d, factor = std::move(factor)](Tape& t, const Tensor& g) {
    const std::vector<double> u = cholesky_solve(factor, d, g.data);  // A^-1 g
    if (t.node(bid).requires_grad) t.accumulate(bid, Tensor({d, 1}, u));
    if (t.node(aid).requires_grad) {
      const Tensor& x = t.node(oid).value;
      Tensor ga = Tensor::zeros({d, d});
      for (int i = 0; i < d; ++i) {
        for (int j = 0; j < d; ++j) {
          ga.data[static_cast<std::size_t>(i) * d + j] =
              -0.5 * (u[static_cast<std::size_t>(i)] * x.data[static_cast<std::size_t>(j)] +
                      u[static_cast<std::size_t>(j)] * x.data[static_cast<std::size_t>(i)]);
        }
      }
      t.accumulate(aid, ga);
    }
  };
  return push(OpKind::solve_spd, std::move(out), {aid, bid}, std::move(pull));
}

Value Tape::detach(Value a) {
  Node n;
  n.kind = OpKind::detach;
  n.value = node(a.id()).value;
  n.requires_grad = false;
  n.parents = {a.id()};
  nodes_.push_back(std::move(n));
  return Value(this, static_cast<int>(nodes_.size()) - 1);
}

void Tape::backward(Value loss) {
  const Node& ln = node(loss.id());
  if (!ln.value.is_scalar()) throw NumericError("backward: loss must be scalar");
  adjoints_.assign(nodes_.size(), Tensor{});
  adjoints_[static_cast<std::size_t>(loss.id())] = Tensor(ln.value.shape, {1.0});
  for (int id = loss.id(); id >= 0; --id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    Tensor& adj = adjoints_[static_cast<std::size_t>(id)];
    if (adj.shape.empty()) continue;
    for (double v : adj.data) {
      if (std::isnan(v)) {
        std::ostringstream os;
        os << "backward: NaN adjoint at node " << id;
        throw NumericError(os.str());
      }
    }
    if (n.pull) n.pull(*this, adj);
  }
}

bool Tape::has_adjoint(Value v) const {
  return static_cast<std::size_t>(v.id()) < adjoints_.size() &&
         !adjoints_[static_cast<std::size_t>(v.id())].shape.empty();
}

const Tensor& Tape::adjoint(Value v) const {
  if (!has_adjoint(v)) throw NumericError("adjoint: node has no adjoint");
  return adjoints_[static_cast<std::size_t>(v.id())];
}

Tensor Tape::adjoint_or_zero(Value v) const {
  if (has_adjoint(v)) return adjoints_[static_cast<std::size_t>(v.id())];
  return Tensor::zeros(node(v.id()).value.shape);
}

int Tape::count_ops(OpKind kind) const {
  int c = 0;
  for (const Node& n : nodes_)
    if (n.kind == kind) ++c;
  return c;
}

OpKind Tape::op_kind(Value v) const { return node(v.id()).kind; }

std::vector<int> Tape::parent_ids(Value v) const { return node(v.id()).parents; }

double grad_check(const std::function<Value(Tape&, Value)>& f, const Tensor& theta, double eps) {
  if (!(eps > 0.0)) throw NumericError("grad_check: eps must be positive");
  Tensor auto_grad;
  {
    Tape tape;
    Value th = tape.param(theta);
    Value loss = f(tape, th);
    if (!std::isfinite(loss.scalar())) throw NumericError("grad_check: non-finite function value");
    tape.backward(loss);
    auto_grad = tape.adjoint_or_zero(th);
  }
  auto eval = [&](const Tensor& t) {
    Tape tape;
    Value th = tape.constant(t);
    const double v = f(tape, th).scalar();
    if (!std::isfinite(v)) throw NumericError("grad_check: non-finite function value");
    return v;
  };
  double max_err = 0.0;
  Tensor work = theta;
  for (std::size_t i = 0; i < theta.data.size(); ++i) {
    const double orig = work.data[i];
    work.data[i] = orig + eps;
    const double fp = eval(work);
    work.data[i] = orig - eps;
    const double fm = eval(work);
    work.data[i] = orig;
    const double fd = (fp - fm) / (2.0 * eps);
    const double err = std::abs(auto_grad.data[i] - fd) / (std::abs(fd) + 1e-8);
    max_err = std::max(max_err, err);
  }
  return max_err;
}

}  // namespace glar::ad
