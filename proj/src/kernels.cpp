#include "dafh/kernels.hpp"

#include <algorithm>
#include <cmath>

#include "dafh/parallel.hpp"

namespace dafh::kern {

namespace {

void group_row(const GroupMLP& m, const double* x, double* hidden, double* probs) {
    const std::size_t d = m.input_dim();
    const std::size_t h = m.hidden_dim();
    const std::size_t k = m.group_count();
    for (std::size_t i = 0; i < h; ++i) {
        double a = m.b1[i];
        const double* w = m.w1.row(i);
        for (std::size_t j = 0; j < d; ++j) a += w[j] * x[j];
        hidden[i] = a > 0.0 ? a : 0.0;
    }
    double zmax = -1e300;
    for (std::size_t i = 0; i < k; ++i) {
        double z = m.b2[i];
        const double* w = m.w2.row(i);
        for (std::size_t j = 0; j < h; ++j) z += w[j] * hidden[j];
        probs[i] = z;
        zmax = std::max(zmax, z);
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        probs[i] = std::exp(probs[i] - zmax);
        sum += probs[i];
    }
    for (std::size_t i = 0; i < k; ++i) probs[i] /= sum;
}

double dot_bias(const LogisticModel& m, const double* x) {
    double t = m.bias;
    for (std::size_t j = 0; j < m.weights.size(); ++j) t += m.weights[j] * x[j];
    return t;
}

// ln(1 + exp(-t)) without overflow
double softplus_neg(double t) {
    return t >= 0.0 ? std::log1p(std::exp(-t)) : -t + std::log1p(std::exp(t));
}

void check_batch(const Matrix& x, std::span<const int> y) {
    if (x.rows == 0) throw std::invalid_argument("empty batch");
    if (y.size() != x.rows) throw std::invalid_argument("batch label count mismatch");
}

struct GradBuffers {
    Matrix gw1;
    std::vector<double> gb1;
    Matrix gw2;
    std::vector<double> gb2;
    std::vector<std::vector<double>> gdw;  // per decoupled model
    std::vector<double> gdb;

    GradBuffers(std::size_t d, std::size_t h, std::size_t k)
        : gw1(h, d), gb1(h, 0.0), gw2(k, h), gb2(k, 0.0),
          gdw(k, std::vector<double>(d, 0.0)), gdb(k, 0.0) {}

    void add(const GradBuffers& o) {
        for (std::size_t i = 0; i < gw1.data.size(); ++i) gw1.data[i] += o.gw1.data[i];
        for (std::size_t i = 0; i < gb1.size(); ++i) gb1[i] += o.gb1[i];
        for (std::size_t i = 0; i < gw2.data.size(); ++i) gw2.data[i] += o.gw2.data[i];
        for (std::size_t i = 0; i < gb2.size(); ++i) gb2[i] += o.gb2[i];
        for (std::size_t k = 0; k < gdw.size(); ++k) {
            for (std::size_t j = 0; j < gdw[k].size(); ++j) gdw[k][j] += o.gdw[k][j];
            gdb[k] += o.gdb[k];
        }
    }
};

struct SurrogateActs {
    Matrix hidden;  // n x H
    Matrix probs;   // n x K
    Matrix prob1;   // n x K
    Matrix soft;    // n x K
};

// forward pass for one row; returns this row's contribution to the main term
double surrogate_row_forward(const TrainedSystem& sys, const double* x, int y, double tau,
                             double* hidden, double* probs, double* prob1, double* soft) {
    const std::size_t k = sys.k();
    group_row(sys.group, x, hidden, probs);
    const double ytil = y > 0 ? 1.0 : 0.0;
    double main = 0.0;
    for (std::size_t m = 0; m < k; ++m) {
        const double q = sigmoid(dot_bias(sys.decoupled[m], x));
        const double p = sigmoid(tau * (q - 0.5));
        const double loss = std::fabs(p - ytil);
        prob1[m] = q;
        soft[m] = loss;
        main += loss - 2.0 * static_cast<double>(k) * probs[m] * loss;
    }
    return main;
}

// backward pass for one row, accumulating into g
void surrogate_row_backward(const TrainedSystem& sys, const double* x, int y, double tau,
                            const double* hidden, const double* probs, const double* prob1,
                            const double* soft, std::span<const double> dpi_gamma,
                            double inv_nk2, double inv_nk, GradBuffers& g,
                            std::vector<double>& dpi, std::vector<double>& dz,
                            std::vector<double>& da) {
    const std::size_t d = sys.dim();
    const std::size_t h = sys.group.hidden_dim();
    const std::size_t k = sys.k();
    const double ytil = y > 0 ? 1.0 : 0.0;
    const double ysign = 1.0 - 2.0 * ytil;  // dL/dp

    for (std::size_t m = 0; m < k; ++m) {
        const double coeff = (1.0 - 2.0 * static_cast<double>(k) * probs[m]) * inv_nk2;
        const double q = prob1[m];
        const double p = ytil > 0.5 ? 1.0 - soft[m] : soft[m];
        const double ds = coeff * ysign * p * (1.0 - p) * tau * q * (1.0 - q);
        auto& gw = g.gdw[m];
        for (std::size_t j = 0; j < d; ++j) gw[j] += ds * x[j];
        g.gdb[m] += ds;
    }

    double inner = 0.0;
    for (std::size_t m = 0; m < k; ++m) {
        dpi[m] = -2.0 * soft[m] * inv_nk + (dpi_gamma.empty() ? 0.0 : dpi_gamma[m]);
        inner += dpi[m] * probs[m];
    }
    for (std::size_t m = 0; m < k; ++m) dz[m] = probs[m] * (dpi[m] - inner);

    for (std::size_t m = 0; m < k; ++m) {
        const double z = dz[m];
        g.gb2[m] += z;
        double* row = g.gw2.row(m);
        for (std::size_t j = 0; j < h; ++j) row[j] += z * hidden[j];
    }
    for (std::size_t j = 0; j < h; ++j) {
        if (hidden[j] <= 0.0) {
            da[j] = 0.0;
            continue;
        }
        double s = 0.0;
        for (std::size_t m = 0; m < k; ++m) s += sys.group.w2.at(m, j) * dz[m];
        da[j] = s;
    }
    for (std::size_t j = 0; j < h; ++j) {
        if (da[j] == 0.0) continue;
        double* row = g.gw1.row(j);
        for (std::size_t c = 0; c < d; ++c) row[c] += da[j] * x[c];
        g.gb1[j] += da[j];
    }
}

SurrogateGrad finish_surrogate(const TrainedSystem& sys, GradBuffers&& g, double obj_main,
                               std::span<const double> pbar, double lambda) {
    SurrogateGrad out;
    out.lambda = lambda;
    out.gamma = balance_penalty(pbar);
    out.value = obj_main + lambda * out.gamma;
    out.group.w1 = std::move(g.gw1);
    out.group.b1 = std::move(g.gb1);
    out.group.w2 = std::move(g.gw2);
    out.group.b2 = std::move(g.gb2);
    out.decoupled.resize(sys.k());
    for (std::size_t m = 0; m < sys.k(); ++m) {
        out.decoupled[m].weights = std::move(g.gdw[m]);
        out.decoupled[m].bias = g.gdb[m];
    }

    if (!std::isfinite(out.value)) throw numeric_error("surrogate: non-finite objective value");
    if (!all_finite(out.group.w1)) throw numeric_error("surrogate: non-finite gradient in w1");
    if (!all_finite(out.group.b1)) throw numeric_error("surrogate: non-finite gradient in b1");
    if (!all_finite(out.group.w2)) throw numeric_error("surrogate: non-finite gradient in w2");
    if (!all_finite(out.group.b2)) throw numeric_error("surrogate: non-finite gradient in b2");
    for (std::size_t m = 0; m < out.decoupled.size(); ++m) {
        if (!all_finite(out.decoupled[m].weights) || !std::isfinite(out.decoupled[m].bias)) {
            throw numeric_error("surrogate: non-finite gradient in decoupled model " +
                                std::to_string(m));
        }
    }
    return out;
}

std::vector<double> gamma_pi_grad(std::span<const double> pbar, double lambda, std::size_t n) {
    std::vector<double> dpi_gamma;
    if (lambda == 0.0) return dpi_gamma;
    const auto k = static_cast<double>(pbar.size());
    dpi_gamma.resize(pbar.size());
    for (std::size_t m = 0; m < pbar.size(); ++m) {
        const double pb = std::max(pbar[m], 1e-300);  // softmax means only underflow to 0
        dpi_gamma[m] = -lambda * (std::log(k * pb) + 1.0) / static_cast<double>(n);
    }
    return dpi_gamma;
}

void check_system(const TrainedSystem& sys, const Matrix& x) {
    if (sys.k() < 2) throw std::invalid_argument("surrogate: need at least 2 groups");
    if (x.cols != sys.dim() || x.cols != sys.group.input_dim()) {
        throw std::invalid_argument("surrogate: feature dimension mismatch");
    }
}

}  // namespace

GroupActs group_forward_batch(const GroupMLP& model, const Matrix& x) {
    GroupActs acts{Matrix(x.rows, model.hidden_dim()), Matrix(x.rows, model.group_count())};
    par::for_rows(x.rows, [&](std::size_t i) {
        group_row(model, x.row(i), acts.hidden.row(i), acts.probs.row(i));
    });
    return acts;
}

GroupActs group_forward_batch_serial(const GroupMLP& model, const Matrix& x) {
    GroupActs acts{Matrix(x.rows, model.hidden_dim()), Matrix(x.rows, model.group_count())};
    for (std::size_t i = 0; i < x.rows; ++i) {
        group_row(model, x.row(i), acts.hidden.row(i), acts.probs.row(i));
    }
    return acts;
}

DecoupledActs decoupled_soft_batch(const std::vector<LogisticModel>& models, const Matrix& x,
                                   std::span<const int> y, double tau) {
    check_batch(x, y);
    DecoupledActs acts{Matrix(x.rows, models.size()), Matrix(x.rows, models.size())};
    par::for_rows(x.rows, [&](std::size_t i) {
        const double ytil = y[i] > 0 ? 1.0 : 0.0;
        for (std::size_t m = 0; m < models.size(); ++m) {
            const double q = sigmoid(dot_bias(models[m], x.row(i)));
            acts.prob1.at(i, m) = q;
            acts.soft_loss.at(i, m) = std::fabs(sigmoid(tau * (q - 0.5)) - ytil);
        }
    });
    return acts;
}

DecoupledActs decoupled_soft_batch_serial(const std::vector<LogisticModel>& models,
                                          const Matrix& x, std::span<const int> y, double tau) {
    check_batch(x, y);
    DecoupledActs acts{Matrix(x.rows, models.size()), Matrix(x.rows, models.size())};
    for (std::size_t i = 0; i < x.rows; ++i) {
        const double ytil = y[i] > 0 ? 1.0 : 0.0;
        for (std::size_t m = 0; m < models.size(); ++m) {
            const double q = sigmoid(dot_bias(models[m], x.row(i)));
            acts.prob1.at(i, m) = q;
            acts.soft_loss.at(i, m) = std::fabs(sigmoid(tau * (q - 0.5)) - ytil);
        }
    }
    return acts;
}

SurrogateGrad surrogate_batch(const TrainedSystem& sys, const Matrix& x, std::span<const int> y,
                              double lambda, double tau) {
    check_batch(x, y);
    check_system(sys, x);
    const std::size_t n = x.rows;
    const std::size_t d = sys.dim();
    const std::size_t h = sys.group.hidden_dim();
    const std::size_t k = sys.k();
    const double inv_nk2 = 1.0 / (static_cast<double>(n) * static_cast<double>(k * k));
    const double inv_nk = 1.0 / (static_cast<double>(n) * static_cast<double>(k));

    SurrogateActs acts{Matrix(n, h), Matrix(n, k), Matrix(n, k), Matrix(n, k)};
    const std::size_t chunks = par::num_chunks(n);
    std::vector<double> chunk_main(chunks, 0.0);
    Matrix chunk_psum(chunks == 0 ? 1 : chunks, k);

    par::for_chunks(n, [&](std::size_t c, std::size_t lo, std::size_t hi) {
        double main = 0.0;
        double* psum = chunk_psum.row(c);
        for (std::size_t i = lo; i < hi; ++i) {
            main += surrogate_row_forward(sys, x.row(i), y[i], tau, acts.hidden.row(i),
                                          acts.probs.row(i), acts.prob1.row(i), acts.soft.row(i));
            const double* pr = acts.probs.row(i);
            for (std::size_t m = 0; m < k; ++m) psum[m] += pr[m];
        }
        chunk_main[c] = main;
    });

    double obj_main = 0.0;
    std::vector<double> pbar(k, 0.0);
    for (std::size_t c = 0; c < chunks; ++c) {
        obj_main += chunk_main[c];
        for (std::size_t m = 0; m < k; ++m) pbar[m] += chunk_psum.at(c, m);
    }
    obj_main *= inv_nk2;
    for (auto& p : pbar) p /= static_cast<double>(n);

    const std::vector<double> dpi_gamma = gamma_pi_grad(pbar, lambda, n);

    std::vector<GradBuffers> partial(chunks, GradBuffers(d, h, k));
    par::for_chunks(n, [&](std::size_t c, std::size_t lo, std::size_t hi) {
        auto& g = partial[c];
        std::vector<double> dpi(k), dz(k), da(h);
        for (std::size_t i = lo; i < hi; ++i) {
            surrogate_row_backward(sys, x.row(i), y[i], tau, acts.hidden.row(i),
                                   acts.probs.row(i), acts.prob1.row(i), acts.soft.row(i),
                                   dpi_gamma, inv_nk2, inv_nk, g, dpi, dz, da);
        }
    });

    GradBuffers total(d, h, k);
    for (const auto& g : partial) total.add(g);
    return finish_surrogate(sys, std::move(total), obj_main, pbar, lambda);
}

SurrogateGrad surrogate_batch_serial(const TrainedSystem& sys, const Matrix& x,
                                     std::span<const int> y, double lambda, double tau) {
    check_batch(x, y);
    check_system(sys, x);
    const std::size_t n = x.rows;
    const std::size_t d = sys.dim();
    const std::size_t h = sys.group.hidden_dim();
    const std::size_t k = sys.k();
    const double inv_nk2 = 1.0 / (static_cast<double>(n) * static_cast<double>(k * k));
    const double inv_nk = 1.0 / (static_cast<double>(n) * static_cast<double>(k));

    SurrogateActs acts{Matrix(n, h), Matrix(n, k), Matrix(n, k), Matrix(n, k)};
    double obj_main = 0.0;
    std::vector<double> pbar(k, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        obj_main += surrogate_row_forward(sys, x.row(i), y[i], tau, acts.hidden.row(i),
                                          acts.probs.row(i), acts.prob1.row(i), acts.soft.row(i));
        for (std::size_t m = 0; m < k; ++m) pbar[m] += acts.probs.at(i, m);
    }
    obj_main *= inv_nk2;
    for (auto& p : pbar) p /= static_cast<double>(n);

    const std::vector<double> dpi_gamma = gamma_pi_grad(pbar, lambda, n);

    GradBuffers g(d, h, k);
    std::vector<double> dpi(k), dz(k), da(h);
    for (std::size_t i = 0; i < n; ++i) {
        surrogate_row_backward(sys, x.row(i), y[i], tau, acts.hidden.row(i), acts.probs.row(i),
                               acts.prob1.row(i), acts.soft.row(i), dpi_gamma, inv_nk2, inv_nk,
                               g, dpi, dz, da);
    }
    return finish_surrogate(sys, std::move(g), obj_main, pbar, lambda);
}

LossTable loss_table_batch(const LogisticModel& pooled,
                           const std::vector<LogisticModel>& decoupled, const AssignFn& assign,
                           const Matrix& x, std::span<const int> y) {
    check_batch(x, y);
    const std::size_t n = x.rows;
    const std::size_t k = decoupled.size();
    LossTable table;
    table.hard = Matrix(n, k + 1);
    table.assignments.resize(n);
    table.group_sizes.assign(k, 0);

    par::for_rows(n, [&](std::size_t i) {
        const double* row = x.row(i);
        table.assignments[i] = assign(i);
        const int pred0 = dot_bias(pooled, row) >= 0.0 ? +1 : -1;
        table.hard.at(i, 0) = pred0 != y[i] ? 1.0 : 0.0;
        for (std::size_t m = 0; m < k; ++m) {
            const int pred = dot_bias(decoupled[m], row) >= 0.0 ? +1 : -1;
            table.hard.at(i, m + 1) = pred != y[i] ? 1.0 : 0.0;
        }
    });

    for (std::size_t i = 0; i < n; ++i) {
        if (table.assignments[i] >= k) throw data_error("loss table: assignment out of range");
        ++table.group_sizes[table.assignments[i]];
    }
    return table;
}

LossTable loss_table_batch_serial(const LogisticModel& pooled,
                                  const std::vector<LogisticModel>& decoupled,
                                  const AssignFn& assign, const Matrix& x,
                                  std::span<const int> y) {
    check_batch(x, y);
    const std::size_t n = x.rows;
    const std::size_t k = decoupled.size();
    LossTable table;
    table.hard = Matrix(n, k + 1);
    table.assignments.resize(n);
    table.group_sizes.assign(k, 0);

    for (std::size_t i = 0; i < n; ++i) {
        const double* row = x.row(i);
        const std::size_t a = assign(i);
        if (a >= k) throw data_error("loss table: assignment out of range");
        table.assignments[i] = a;
        ++table.group_sizes[a];
        const int pred0 = dot_bias(pooled, row) >= 0.0 ? +1 : -1;
        table.hard.at(i, 0) = pred0 != y[i] ? 1.0 : 0.0;
        for (std::size_t m = 0; m < k; ++m) {
            const int pred = dot_bias(decoupled[m], row) >= 0.0 ? +1 : -1;
            table.hard.at(i, m + 1) = pred != y[i] ? 1.0 : 0.0;
        }
    }
    return table;
}

LogisticGrad logistic_grad_batch(const LogisticModel& model, const Matrix& x,
                                 std::span<const int> y, std::span<const std::size_t> idx) {
    if (idx.empty()) throw std::invalid_argument("logistic_grad: empty batch");
    const std::size_t d = model.dim();
    const double inv_m = 1.0 / static_cast<double>(idx.size());

    const std::size_t chunks = par::num_chunks(idx.size());
    Matrix cgw(chunks, d);
    std::vector<double> cgb(chunks, 0.0), closs(chunks, 0.0);

    par::for_chunks(idx.size(), [&](std::size_t c, std::size_t lo, std::size_t hi) {
        double* gw = cgw.row(c);
        double gb = 0.0, loss = 0.0;
        for (std::size_t r = lo; r < hi; ++r) {
            const std::size_t i = idx[r];
            const double* row = x.row(i);
            const double t = dot_bias(model, row);
            const double ytil = y[i] > 0 ? 1.0 : 0.0;
            const double ds = (sigmoid(t) - ytil) * inv_m;
            for (std::size_t j = 0; j < d; ++j) gw[j] += ds * row[j];
            gb += ds;
            loss += softplus_neg(static_cast<double>(y[i]) * t) * inv_m;
        }
        cgb[c] = gb;
        closs[c] = loss;
    });

    LogisticGrad out;
    out.gw.assign(d, 0.0);
    for (std::size_t c = 0; c < chunks; ++c) {
        for (std::size_t j = 0; j < d; ++j) out.gw[j] += cgw.at(c, j);
        out.gb += cgb[c];
        out.loss += closs[c];
    }
    return out;
}

LogisticGrad logistic_grad_batch_serial(const LogisticModel& model, const Matrix& x,
                                        std::span<const int> y,
                                        std::span<const std::size_t> idx) {
    if (idx.empty()) throw std::invalid_argument("logistic_grad: empty batch");
    const std::size_t d = model.dim();
    const double inv_m = 1.0 / static_cast<double>(idx.size());

    LogisticGrad out;
    out.gw.assign(d, 0.0);
    for (const std::size_t i : idx) {
        const double* row = x.row(i);
        const double t = dot_bias(model, row);
        const double ytil = y[i] > 0 ? 1.0 : 0.0;
        const double ds = (sigmoid(t) - ytil) * inv_m;
        for (std::size_t j = 0; j < d; ++j) out.gw[j] += ds * row[j];
        out.gb += ds;
        out.loss += softplus_neg(static_cast<double>(y[i]) * t) * inv_m;
    }
    return out;
}

namespace {

std::size_t nearest_centroid(const Matrix& centroids, const double* row, double* dist2_out) {
    std::size_t best = 0;
    double best_d = 1e300;
    for (std::size_t c = 0; c < centroids.rows; ++c) {
        const double* cen = centroids.row(c);
        double d2 = 0.0;
        for (std::size_t j = 0; j < centroids.cols; ++j) {
            const double diff = row[j] - cen[j];
            d2 += diff * diff;
        }
        if (d2 < best_d) {
            best_d = d2;
            best = c;
        }
    }
    if (dist2_out) *dist2_out = best_d;
    return best;
}

}  // namespace

double kmeans_assign(const Matrix& x, const Matrix& centroids, std::vector<std::size_t>& out) {
    out.resize(x.rows);
    const std::size_t chunks = par::num_chunks(x.rows);
    std::vector<double> cinertia(chunks, 0.0);
    par::for_chunks(x.rows, [&](std::size_t c, std::size_t lo, std::size_t hi) {
        double acc = 0.0;
        for (std::size_t i = lo; i < hi; ++i) {
            double d2 = 0.0;
            out[i] = nearest_centroid(centroids, x.row(i), &d2);
            acc += d2;
        }
        cinertia[c] = acc;
    });
    double inertia = 0.0;
    for (const double v : cinertia) inertia += v;
    return inertia;
}

double kmeans_assign_serial(const Matrix& x, const Matrix& centroids,
                            std::vector<std::size_t>& out) {
    out.resize(x.rows);
    double inertia = 0.0;
    for (std::size_t i = 0; i < x.rows; ++i) {
        double d2 = 0.0;
        out[i] = nearest_centroid(centroids, x.row(i), &d2);
        inertia += d2;
    }
    return inertia;
}

void kmeans_update(const Matrix& x, const std::vector<std::size_t>& assign, Matrix& centroids,
                   std::vector<std::size_t>& empty) {
    const std::size_t k = centroids.rows;
    const std::size_t d = centroids.cols;
    const std::size_t chunks = par::num_chunks(x.rows);
    std::vector<Matrix> csum(chunks, Matrix(k, d));
    std::vector<std::vector<std::size_t>> ccount(chunks, std::vector<std::size_t>(k, 0));

    par::for_chunks(x.rows, [&](std::size_t c, std::size_t lo, std::size_t hi) {
        auto& sum = csum[c];
        auto& cnt = ccount[c];
        for (std::size_t i = lo; i < hi; ++i) {
            const std::size_t a = assign[i];
            double* srow = sum.row(a);
            const double* row = x.row(i);
            for (std::size_t j = 0; j < d; ++j) srow[j] += row[j];
            ++cnt[a];
        }
    });

    Matrix sum(k, d);
    std::vector<std::size_t> count(k, 0);
    for (std::size_t c = 0; c < chunks; ++c) {
        for (std::size_t i = 0; i < sum.data.size(); ++i) sum.data[i] += csum[c].data[i];
        for (std::size_t m = 0; m < k; ++m) count[m] += ccount[c][m];
    }

    empty.clear();
    for (std::size_t m = 0; m < k; ++m) {
        if (count[m] == 0) {
            empty.push_back(m);
            continue;
        }
        double* row = centroids.row(m);
        const double inv = 1.0 / static_cast<double>(count[m]);
        for (std::size_t j = 0; j < d; ++j) row[j] = sum.at(m, j) * inv;
    }
}

void kmeans_update_serial(const Matrix& x, const std::vector<std::size_t>& assign,
                          Matrix& centroids, std::vector<std::size_t>& empty) {
    const std::size_t k = centroids.rows;
    const std::size_t d = centroids.cols;
    Matrix sum(k, d);
    std::vector<std::size_t> count(k, 0);
    for (std::size_t i = 0; i < x.rows; ++i) {
        const std::size_t a = assign[i];
        double* srow = sum.row(a);
        const double* row = x.row(i);
        for (std::size_t j = 0; j < d; ++j) srow[j] += row[j];
        ++count[a];
    }
    empty.clear();
    for (std::size_t m = 0; m < k; ++m) {
        if (count[m] == 0) {
            empty.push_back(m);
            continue;
        }
        double* row = centroids.row(m);
        const double inv = 1.0 / static_cast<double>(count[m]);
        for (std::size_t j = 0; j < d; ++j) row[j] = sum.at(m, j) * inv;
    }
}

}  // namespace dafh::kern
