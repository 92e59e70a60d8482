#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "asmalign/tensor.hpp"
#include "asmalign/util.hpp"

namespace asmalign {

struct NonScalarLoss : Error {
  NonScalarLoss() : Error("NonScalarLoss: backward requires a scalar loss node") {}
};

struct IndexOutOfBounds : Error {
  explicit IndexOutOfBounds(const std::string& msg) : Error("IndexOutOfBounds: " + msg) {}
};

struct ZeroNorm : Error {
  ZeroNorm() : Error("ZeroNorm: cannot normalize a zero vector") {}
};

enum class Reduction { Sum, Mean };

// Reverse-mode tape. Nodes are created in topological order by construction,
// so the backward pass is a single reverse sweep.
template <typename T>
class Graph {
 public:
  using NodeId = std::size_t;

  NodeId constant(Tensor<T> v) { return push(std::move(v), {}, nullptr, -1); }

  // Leaf bound to an external parameter tensor; gradients are collected per
  // param_id via flush_param_grads.
  NodeId param(const Tensor<T>& value, int param_id) {
    return push(value, {}, nullptr, param_id);
  }

  const Tensor<T>& value(NodeId n) const { return nodes_[n].value; }
  const Tensor<T>& grad(NodeId n) const { return nodes_[n].grad; }
  std::size_t size() const { return nodes_.size(); }

  // ---- forward ops ----

  NodeId matmul(NodeId a, NodeId b) {
    const auto& A = nodes_[a].value;
    const auto& B = nodes_[b].value;
    if (A.cols() != B.rows())
      throw ShapeMismatch("matmul " + A.shape_str() + " * " + B.shape_str());
    Tensor<T> C(A.rows(), B.cols());
    mm(A.data.data(), B.data.data(), C.data.data(), A.rows(), A.cols(), B.cols());
    return push(std::move(C), {a, b}, [](Graph& g, NodeId self) {
      auto& n = g.nodes_[self];
      const auto& A = g.nodes_[n.parents[0]].value;
      const auto& B = g.nodes_[n.parents[1]].value;
      auto& dA = g.nodes_[n.parents[0]].grad;
      auto& dB = g.nodes_[n.parents[1]].grad;
      // dA += G * B^T, dB += A^T * G
      mm_nt(n.grad.data.data(), B.data.data(), dA.data.data(), A.rows(), B.cols(), A.cols());
      mm_tn(A.data.data(), n.grad.data.data(), dB.data.data(), A.rows(), A.cols(), B.cols());
    });
  }

  // A * B^T where A is [m x k], B is [n x k].
  NodeId matmul_nt(NodeId a, NodeId b) {
    const auto& A = nodes_[a].value;
    const auto& B = nodes_[b].value;
    if (A.cols() != B.cols())
      throw ShapeMismatch("matmul_nt " + A.shape_str() + " * " + B.shape_str() + "^T");
    Tensor<T> C(A.rows(), B.rows());
    mm_nt(A.data.data(), B.data.data(), C.data.data(), A.rows(), A.cols(), B.rows());
    return push(std::move(C), {a, b}, [](Graph& g, NodeId self) {
      auto& n = g.nodes_[self];
      const auto& A = g.nodes_[n.parents[0]].value;
      const auto& B = g.nodes_[n.parents[1]].value;
      auto& dA = g.nodes_[n.parents[0]].grad;
      auto& dB = g.nodes_[n.parents[1]].grad;
      // dA += G * B, dB += G^T * A
      mm(n.grad.data.data(), B.data.data(), dA.data.data(), A.rows(), B.rows(), B.cols());
      mm_tn(n.grad.data.data(), A.data.data(), dB.data.data(), A.rows(), B.rows(), A.cols());
    });
  }

  // Elementwise add, or row-broadcast when b is [1 x d].
  NodeId add(NodeId a, NodeId b) {
    const auto& A = nodes_[a].value;
    const auto& B = nodes_[b].value;
    bool broadcast = B.rows() == 1 && A.cols() == B.cols() && A.rows() != 1;
    if (!broadcast && !A.same_shape(B))
      throw ShapeMismatch("add " + A.shape_str() + " + " + B.shape_str());
    Tensor<T> C = A;
    if (broadcast) {
      for (std::size_t i = 0; i < A.rows(); ++i)
        for (std::size_t j = 0; j < A.cols(); ++j) C.at(i, j) += B.at(0, j);
    } else {
      for (std::size_t i = 0; i < C.numel(); ++i) C.data[i] += B.data[i];
    }
    return push(std::move(C), {a, b}, [broadcast](Graph& g, NodeId self) {
      auto& n = g.nodes_[self];
      auto& dA = g.nodes_[n.parents[0]].grad;
      auto& dB = g.nodes_[n.parents[1]].grad;
      for (std::size_t i = 0; i < dA.numel(); ++i) dA.data[i] += n.grad.data[i];
      if (broadcast) {
        std::size_t rows = n.grad.rows(), cols = n.grad.cols();
        for (std::size_t i = 0; i < rows; ++i)
          for (std::size_t j = 0; j < cols; ++j) dB.at(0, j) += n.grad.at(i, j);
      } else {
        for (std::size_t i = 0; i < dB.numel(); ++i) dB.data[i] += n.grad.data[i];
      }
    });
  }

  NodeId scale(NodeId a, T c) {
    Tensor<T> C = nodes_[a].value;
    for (auto& v : C.data) v *= c;
    return push(std::move(C), {a}, [c](Graph& g, NodeId self) {
      auto& n = g.nodes_[self];
      auto& dA = g.nodes_[n.parents[0]].grad;
      for (std::size_t i = 0; i < dA.numel(); ++i) dA.data[i] += c * n.grad.data[i];
    });
  }

  // y = x * exp(s) with s a scalar node (learnable logit scale).
  NodeId scale_exp(NodeId x, NodeId s) {
    const auto& S = nodes_[s].value;
    if (S.numel() != 1) throw ShapeMismatch("scale_exp: scale must be scalar");
    T e = std::exp(S.data[0]);
    Tensor<T> C = nodes_[x].value;
    for (auto& v : C.data) v *= e;
    return push(std::move(C), {x, s}, [e](Graph& g, NodeId self) {
      auto& n = g.nodes_[self];
      const auto& X = g.nodes_[n.parents[0]].value;
      auto& dX = g.nodes_[n.parents[0]].grad;
      auto& dS = g.nodes_[n.parents[1]].grad;
      T acc = 0;
      for (std::size_t i = 0; i < dX.numel(); ++i) {
        dX.data[i] += e * n.grad.data[i];
        acc += n.grad.data[i] * X.data[i];
      }
      dS.data[0] += e * acc;
    });
  }

  NodeId mul(NodeId a, NodeId b) {
    const auto& A = nodes_[a].value;
    const auto& B = nodes_[b].value;
    if (!A.same_shape(B)) throw ShapeMismatch("mul " + A.shape_str() + " * " + B.shape_str());
    Tensor<T> C = A;
    for (std::size_t i = 0; i < C.numel(); ++i) C.data[i] *= B.data[i];
    return push(std::move(C), {a, b}, [](Graph& g, NodeId self) {
      auto& n = g.nodes_[self];
      const auto& A = g.nodes_[n.parents[0]].value;
      const auto& B = g.nodes_[n.parents[1]].value;
      auto& dA = g.nodes_[n.parents[0]].grad;
      auto& dB = g.nodes_[n.parents[1]].grad;
      for (std::size_t i = 0; i < dA.numel(); ++i) {
        dA.data[i] += n.grad.data[i] * B.data[i];
        dB.data[i] += n.grad.data[i] * A.data[i];
      }
    });
  }

  NodeId gelu(NodeId a) {
    Tensor<T> C = nodes_[a].value;
    for (auto& v : C.data) {
      double x = static_cast<double>(v);
      v = static_cast<T>(0.5 * x * (1.0 + std::erf(x * 0.7071067811865476)));
    }
    return push(std::move(C), {a}, [](Graph& g, NodeId self) {
      auto& n = g.nodes_[self];
      const auto& X = g.nodes_[n.parents[0]].value;
      auto& dX = g.nodes_[n.parents[0]].grad;
      for (std::size_t i = 0; i < dX.numel(); ++i) {
        double x = static_cast<double>(X.data[i]);
        double cdf = 0.5 * (1.0 + std::erf(x * 0.7071067811865476));
        double pdf = std::exp(-0.5 * x * x) * 0.3989422804014327;
        dX.data[i] += n.grad.data[i] * static_cast<T>(cdf + x * pdf);
      }
    });
  }

  NodeId layer_norm(NodeId x, NodeId gamma, NodeId beta, T eps) {
    const auto& X = nodes_[x].value;
    const auto& G = nodes_[gamma].value;
    const auto& B = nodes_[beta].value;
    std::size_t d = X.cols();
    if (G.numel() != d || B.numel() != d)
      throw ShapeMismatch("layer_norm affine params must be [1 x " + std::to_string(d) + "]");
    Tensor<T> Y(X.rows(), d);
    for (std::size_t i = 0; i < X.rows(); ++i) {
      T mu = 0, var = 0;
      for (std::size_t j = 0; j < d; ++j) mu += X.at(i, j);
      mu /= static_cast<T>(d);
      for (std::size_t j = 0; j < d; ++j) {
        T c = X.at(i, j) - mu;
        var += c * c;
      }
      var /= static_cast<T>(d);
      T inv = T(1) / std::sqrt(var + eps);
      for (std::size_t j = 0; j < d; ++j)
        Y.at(i, j) = (X.at(i, j) - mu) * inv * G.data[j] + B.data[j];
    }
    return push(std::move(Y), {x, gamma, beta}, [eps](Graph& g, NodeId self) {
      auto& n = g.nodes_[self];
      const auto& X = g.nodes_[n.parents[0]].value;
      const auto& Ga = g.nodes_[n.parents[1]].value;
      auto& dX = g.nodes_[n.parents[0]].grad;
      auto& dGa = g.nodes_[n.parents[1]].grad;
      auto& dBe = g.nodes_[n.parents[2]].grad;
      std::size_t d = X.cols();
      for (std::size_t i = 0; i < X.rows(); ++i) {
        T mu = 0, var = 0;
        for (std::size_t j = 0; j < d; ++j) mu += X.at(i, j);
        mu /= static_cast<T>(d);
        for (std::size_t j = 0; j < d; ++j) {
          T c = X.at(i, j) - mu;
          var += c * c;
        }
        var /= static_cast<T>(d);
        T inv = T(1) / std::sqrt(var + eps);
        // dxhat, then the two reduction terms
        T sum_dxhat = 0, sum_dxhat_xhat = 0;
        for (std::size_t j = 0; j < d; ++j) {
          T xhat = (X.at(i, j) - mu) * inv;
          T dxhat = n.grad.at(i, j) * Ga.data[j];
          sum_dxhat += dxhat;
          sum_dxhat_xhat += dxhat * xhat;
          dGa.data[j] += n.grad.at(i, j) * xhat;
          dBe.data[j] += n.grad.at(i, j);
        }
        for (std::size_t j = 0; j < d; ++j) {
          T xhat = (X.at(i, j) - mu) * inv;
          T dxhat = n.grad.at(i, j) * Ga.data[j];
          dX.at(i, j) += inv * (dxhat - sum_dxhat / static_cast<T>(d) -
                                xhat * sum_dxhat_xhat / static_cast<T>(d));
        }
      }
    });
  }

  // Row-wise softmax with max subtraction.
  NodeId softmax_rows(NodeId x) {
    const auto& X = nodes_[x].value;
    Tensor<T> Y(X.rows(), X.cols());
    for (std::size_t i = 0; i < X.rows(); ++i) {
      T mx = X.at(i, 0);
      for (std::size_t j = 1; j < X.cols(); ++j) mx = std::max(mx, X.at(i, j));
      T z = 0;
      for (std::size_t j = 0; j < X.cols(); ++j) {
        Y.at(i, j) = std::exp(X.at(i, j) - mx);
        z += Y.at(i, j);
      }
      for (std::size_t j = 0; j < X.cols(); ++j) Y.at(i, j) /= z;
    }
    return push(std::move(Y), {x}, [](Graph& g, NodeId self) {
      auto& n = g.nodes_[self];
      auto& dX = g.nodes_[n.parents[0]].grad;
      const auto& Y = n.value;
      for (std::size_t i = 0; i < Y.rows(); ++i) {
        T dot = 0;
        for (std::size_t j = 0; j < Y.cols(); ++j) dot += n.grad.at(i, j) * Y.at(i, j);
        for (std::size_t j = 0; j < Y.cols(); ++j)
          dX.at(i, j) += Y.at(i, j) * (n.grad.at(i, j) - dot);
      }
    });
  }

  // y[i] = table[ids[i]]
  NodeId embedding_rows(NodeId table, std::vector<int> ids) {
    const auto& Tb = nodes_[table].value;
    for (int id : ids)
      if (id < 0 || static_cast<std::size_t>(id) >= Tb.rows())
        throw IndexOutOfBounds("embedding id " + std::to_string(id) + " of table " +
                               Tb.shape_str());
    Tensor<T> Y(ids.size(), Tb.cols());
    for (std::size_t i = 0; i < ids.size(); ++i)
      for (std::size_t j = 0; j < Tb.cols(); ++j) Y.at(i, j) = Tb.at(ids[i], j);
    return push(std::move(Y), {table}, [ids = std::move(ids)](Graph& g, NodeId self) {
      auto& n = g.nodes_[self];
      auto& dT = g.nodes_[n.parents[0]].grad;
      for (std::size_t i = 0; i < ids.size(); ++i)
        for (std::size_t j = 0; j < dT.cols(); ++j) dT.at(ids[i], j) += n.grad.at(i, j);
    });
  }

  NodeId gather_rows(NodeId x, std::vector<std::size_t> rows) {
    const auto& X = nodes_[x].value;
    for (auto r : rows)
      if (r >= X.rows()) throw IndexOutOfBounds("gather_rows row " + std::to_string(r));
    Tensor<T> Y(rows.size(), X.cols());
    for (std::size_t i = 0; i < rows.size(); ++i)
      for (std::size_t j = 0; j < X.cols(); ++j) Y.at(i, j) = X.at(rows[i], j);
    return push(std::move(Y), {x}, [rows = std::move(rows)](Graph& g, NodeId self) {
      auto& n = g.nodes_[self];
      auto& dX = g.nodes_[n.parents[0]].grad;
      for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < dX.cols(); ++j) dX.at(rows[i], j) += n.grad.at(i, j);
    });
  }

  NodeId col_slice(NodeId x, std::size_t c0, std::size_t c1) {
    const auto& X = nodes_[x].value;
    if (c0 >= c1 || c1 > X.cols()) throw ShapeMismatch("col_slice range");
    Tensor<T> Y(X.rows(), c1 - c0);
    for (std::size_t i = 0; i < X.rows(); ++i)
      for (std::size_t j = c0; j < c1; ++j) Y.at(i, j - c0) = X.at(i, j);
    return push(std::move(Y), {x}, [c0, c1](Graph& g, NodeId self) {
      auto& n = g.nodes_[self];
      auto& dX = g.nodes_[n.parents[0]].grad;
      for (std::size_t i = 0; i < n.grad.rows(); ++i)
        for (std::size_t j = c0; j < c1; ++j) dX.at(i, j) += n.grad.at(i, j - c0);
    });
  }

  NodeId concat_cols(const std::vector<NodeId>& xs) {
    if (xs.empty()) throw ShapeMismatch("concat_cols: empty");
    std::size_t rows = nodes_[xs[0]].value.rows(), cols = 0;
    for (auto x : xs) {
      if (nodes_[x].value.rows() != rows) throw ShapeMismatch("concat_cols rows");
      cols += nodes_[x].value.cols();
    }
    Tensor<T> Y(rows, cols);
    std::size_t off = 0;
    for (auto x : xs) {
      const auto& X = nodes_[x].value;
      for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < X.cols(); ++j) Y.at(i, off + j) = X.at(i, j);
      off += X.cols();
    }
    return push(std::move(Y), xs, [](Graph& g, NodeId self) {
      auto& n = g.nodes_[self];
      std::size_t off = 0;
      for (auto p : n.parents) {
        auto& dX = g.nodes_[p].grad;
        for (std::size_t i = 0; i < dX.rows(); ++i)
          for (std::size_t j = 0; j < dX.cols(); ++j) dX.at(i, j) += n.grad.at(i, off + j);
        off += dX.cols();
      }
    });
  }

  NodeId concat_rows(const std::vector<NodeId>& xs) {
    if (xs.empty()) throw ShapeMismatch("concat_rows: empty");
    std::size_t cols = nodes_[xs[0]].value.cols(), rows = 0;
    for (auto x : xs) {
      if (nodes_[x].value.cols() != cols) throw ShapeMismatch("concat_rows cols");
      rows += nodes_[x].value.rows();
    }
    Tensor<T> Y(rows, cols);
    std::size_t off = 0;
    for (auto x : xs) {
      const auto& X = nodes_[x].value;
      for (std::size_t i = 0; i < X.rows(); ++i)
        for (std::size_t j = 0; j < cols; ++j) Y.at(off + i, j) = X.at(i, j);
      off += X.rows();
    }
    return push(std::move(Y), xs, [](Graph& g, NodeId self) {
      auto& n = g.nodes_[self];
      std::size_t off = 0;
      for (auto p : n.parents) {
        auto& dX = g.nodes_[p].grad;
        for (std::size_t i = 0; i < dX.rows(); ++i)
          for (std::size_t j = 0; j < dX.cols(); ++j) dX.at(i, j) += n.grad.at(off + i, j);
        off += dX.rows();
      }
    });
  }

  // Mean over rows with keep[i] != 0; output is [1 x d].
  NodeId mean_pool_rows(NodeId x, std::vector<char> keep) {
    const auto& X = nodes_[x].value;
    if (keep.size() != X.rows()) throw ShapeMismatch("mean_pool mask length");
    std::size_t k = 0;
    for (char c : keep) k += (c != 0);
    if (k == 0) throw ShapeMismatch("mean_pool: empty mask");
    Tensor<T> Y(1, X.cols());
    for (std::size_t i = 0; i < X.rows(); ++i)
      if (keep[i])
        for (std::size_t j = 0; j < X.cols(); ++j) Y.at(0, j) += X.at(i, j);
    for (auto& v : Y.data) v /= static_cast<T>(k);
    return push(std::move(Y), {x}, [keep = std::move(keep), k](Graph& g, NodeId self) {
      auto& n = g.nodes_[self];
      auto& dX = g.nodes_[n.parents[0]].grad;
      T inv = T(1) / static_cast<T>(k);
      for (std::size_t i = 0; i < dX.rows(); ++i)
        if (keep[i])
          for (std::size_t j = 0; j < dX.cols(); ++j) dX.at(i, j) += n.grad.at(0, j) * inv;
    });
  }

  // Softmax cross entropy over rows of logits against integer targets.
  NodeId cross_entropy(NodeId logits, std::vector<int> targets, Reduction red) {
    const auto& X = nodes_[logits].value;
    if (targets.size() != X.rows()) throw ShapeMismatch("cross_entropy target count");
    for (int t : targets)
      if (t < 0 || static_cast<std::size_t>(t) >= X.cols())
        throw IndexOutOfBounds("cross_entropy target " + std::to_string(t));
    T total = 0;
    for (std::size_t i = 0; i < X.rows(); ++i) {
      T mx = X.at(i, 0);
      for (std::size_t j = 1; j < X.cols(); ++j) mx = std::max(mx, X.at(i, j));
      T z = 0;
      for (std::size_t j = 0; j < X.cols(); ++j) z += std::exp(X.at(i, j) - mx);
      total += std::log(z) + mx - X.at(i, targets[i]);
    }
    if (red == Reduction::Mean) total /= static_cast<T>(X.rows());
    return push(Tensor<T>::scalar(total), {logits},
                [targets = std::move(targets), red](Graph& g, NodeId self) {
                  auto& n = g.nodes_[self];
                  const auto& X = g.nodes_[n.parents[0]].value;
                  auto& dX = g.nodes_[n.parents[0]].grad;
                  T w = n.grad.data[0];
                  if (red == Reduction::Mean) w /= static_cast<T>(X.rows());
                  for (std::size_t i = 0; i < X.rows(); ++i) {
                    T mx = X.at(i, 0);
                    for (std::size_t j = 1; j < X.cols(); ++j) mx = std::max(mx, X.at(i, j));
                    T z = 0;
                    for (std::size_t j = 0; j < X.cols(); ++j) z += std::exp(X.at(i, j) - mx);
                    for (std::size_t j = 0; j < X.cols(); ++j) {
                      T p = std::exp(X.at(i, j) - mx) / z;
                      dX.at(i, j) += w * (p - (static_cast<int>(j) == targets[i] ? T(1) : T(0)));
                    }
                  }
                });
  }

  NodeId sum(NodeId x) {
    const auto& X = nodes_[x].value;
    T s = 0;
    for (T v : X.data) s += v;
    return push(Tensor<T>::scalar(s), {x}, [](Graph& g, NodeId self) {
      auto& n = g.nodes_[self];
      auto& dX = g.nodes_[n.parents[0]].grad;
      for (auto& v : dX.data) v += n.grad.data[0];
    });
  }

  NodeId l2_normalize_rows(NodeId x) {
    const auto& X = nodes_[x].value;
    Tensor<T> Y(X.rows(), X.cols());
    for (std::size_t i = 0; i < X.rows(); ++i) {
      T sq = 0;
      for (std::size_t j = 0; j < X.cols(); ++j) sq += X.at(i, j) * X.at(i, j);
      if (sq <= T(0)) throw ZeroNorm();
      T inv = T(1) / std::sqrt(sq);
      for (std::size_t j = 0; j < X.cols(); ++j) Y.at(i, j) = X.at(i, j) * inv;
    }
    return push(std::move(Y), {x}, [](Graph& g, NodeId self) {
      auto& n = g.nodes_[self];
      const auto& X = g.nodes_[n.parents[0]].value;
      auto& dX = g.nodes_[n.parents[0]].grad;
      const auto& Y = n.value;
      for (std::size_t i = 0; i < X.rows(); ++i) {
        T sq = 0;
        for (std::size_t j = 0; j < X.cols(); ++j) sq += X.at(i, j) * X.at(i, j);
        T inv = T(1) / std::sqrt(sq);
        T dot = 0;
        for (std::size_t j = 0; j < X.cols(); ++j) dot += n.grad.at(i, j) * Y.at(i, j);
        for (std::size_t j = 0; j < X.cols(); ++j)
          dX.at(i, j) += (n.grad.at(i, j) - Y.at(i, j) * dot) * inv;
      }
    });
  }

  // ---- backward ----

  void backward(NodeId loss) {
    if (nodes_[loss].value.numel() != 1) throw NonScalarLoss();
    for (auto& n : nodes_) {
      n.grad = Tensor<T>(n.value.rows(), n.value.cols());
    }
    nodes_[loss].grad.data[0] = T(1);
    for (std::size_t i = nodes_.size(); i-- > 0;) {
      if (nodes_[i].back && i <= loss) nodes_[i].back(*this, i);
    }
  }

  // Adds leaf gradients into `out[param_id]`; `out` must be sized by caller.
  void flush_param_grads(std::vector<Tensor<T>>& out) const {
    for (const auto& n : nodes_) {
      if (n.param_id < 0) continue;
      auto& dst = out[static_cast<std::size_t>(n.param_id)];
      if (dst.numel() == 0) dst = Tensor<T>(n.value.rows(), n.value.cols());
      for (std::size_t i = 0; i < dst.numel(); ++i) dst.data[i] += n.grad.data[i];
    }
  }

 private:
  struct Node {
    Tensor<T> value;
    Tensor<T> grad;
    std::vector<NodeId> parents;
    std::function<void(Graph&, NodeId)> back;
    int param_id = -1;
  };

  NodeId push(Tensor<T> v, std::vector<NodeId> parents,
              std::function<void(Graph&, NodeId)> back, int param_id = -1) {
    Node n;
    n.value = std::move(v);
    n.parents = std::move(parents);
    n.back = std::move(back);
    n.param_id = param_id;
    nodes_.push_back(std::move(n));
    return nodes_.size() - 1;
  }

  static void mm(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
      T* ci = c + i * n;
      for (std::size_t kk = 0; kk < k; ++kk) {
        T av = a[i * k + kk];
        const T* bk = b + kk * n;
        for (std::size_t j = 0; j < n; ++j) ci[j] += av * bk[j];
      }
    }
  }

  // c[m x k2] += a[m x n] * b[k2 x n]^T  (dot products of rows)
  static void mm_nt(const T* a, const T* b, T* c, std::size_t m, std::size_t n, std::size_t k2) {
    for (std::size_t i = 0; i < m; ++i) {
      const T* ai = a + i * n;
      for (std::size_t q = 0; q < k2; ++q) {
        const T* bq = b + q * n;
        T acc = 0;
        for (std::size_t j = 0; j < n; ++j) acc += ai[j] * bq[j];
        c[i * k2 + q] += acc;
      }
    }
  }

  // c[k x n] += a[m x k]^T * b[m x n]
  static void mm_tn(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
      const T* bi = b + i * n;
      for (std::size_t q = 0; q < k; ++q) {
        T av = a[i * k + q];
        T* cq = c + q * n;
        for (std::size_t j = 0; j < n; ++j) cq[j] += av * bi[j];
      }
    }
  }

  std::vector<Node> nodes_;
};

}  // namespace asmalign
