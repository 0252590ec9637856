#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace repro {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

enum class ErrorKind { validation, io, numeric };

// Every failure raised by the library carries a kind so that the CLI can map
// it to an exit code.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

inline Error validation_error(const std::string& what) { return {ErrorKind::validation, what}; }
inline Error io_error(const std::string& what) { return {ErrorKind::io, what}; }
inline Error numeric_error(const std::string& what) { return {ErrorKind::numeric, what}; }

/// Observed covariates and binary labels. Labels are stored as 0/1; the
/// +/-1 form used by the likelihood is derived on demand.
class Dataset {
public:
    Dataset() = default;

    Index n() const noexcept { return x_.rows(); }
    Index p() const noexcept { return x_.cols(); }
    const Matrix& x() const noexcept { return x_; }
    const Eigen::VectorXi& y() const noexcept { return y_; }

    double sign(Index i) const noexcept { return y_[i] == 1 ? 1.0 : -1.0; }

    Vector signs() const {
        Vector s(n());
        for (Index i = 0; i < n(); ++i) s[i] = sign(i);
        return s;
    }

    bool degenerate_labels() const noexcept {
        const auto ones = y_.sum();
        return ones == 0 || ones == n();
    }

    friend Dataset validate_dataset(Matrix x, Eigen::VectorXi y);

private:
    Matrix x_;
    Eigen::VectorXi y_;
};

inline Dataset validate_dataset(Matrix x, Eigen::VectorXi y) {
    if (x.rows() < 1 || x.cols() < 1) throw validation_error("dimension mismatch: empty design");
    if (x.rows() != y.size()) throw validation_error("dimension mismatch: x has " +
        std::to_string(x.rows()) + " rows but y has " + std::to_string(y.size()) + " entries");
    for (Index i = 0; i < y.size(); ++i)
        if (y[i] != 0 && y[i] != 1) throw validation_error("non-binary label at row " + std::to_string(i));
    if (!x.allFinite()) throw validation_error("non-finite covariate");
    Dataset d;
    d.x_ = std::move(x);
    d.y_ = std::move(y);
    return d;
}

inline Dataset validate_dataset(const Matrix& x, const std::vector<int>& y) {
    Eigen::VectorXi yy(static_cast<Index>(y.size()));
    for (std::size_t i = 0; i < y.size(); ++i) yy[static_cast<Index>(i)] = y[i];
    return validate_dataset(x, std::move(yy));
}

/// A model: a strictly increasing list of column indices.
class SupportSet {
public:
    SupportSet() = default;

    /// Sorts and deduplicates the input.
    explicit SupportSet(std::vector<Index> idx) : idx_(std::move(idx)) {
        std::sort(idx_.begin(), idx_.end());
        idx_.erase(std::unique(idx_.begin(), idx_.end()), idx_.end());
    }

    SupportSet(std::initializer_list<Index> idx) : SupportSet(std::vector<Index>(idx)) {}

    static SupportSet first_k(Index k) {
        std::vector<Index> v(static_cast<std::size_t>(k));
        for (Index j = 0; j < k; ++j) v[static_cast<std::size_t>(j)] = j;
        return SupportSet(std::move(v));
    }

    static SupportSet from_nonzeros(const Vector& beta, Index limit = -1) {
        std::vector<Index> v;
        const Index m = limit < 0 ? beta.size() : limit;
        for (Index j = 0; j < m; ++j)
            if (beta[j] != 0.0) v.push_back(j);
        SupportSet s;
        s.idx_ = std::move(v);
        return s;
    }

    std::size_t size() const noexcept { return idx_.size(); }
    bool empty() const noexcept { return idx_.empty(); }
    const std::vector<Index>& indices() const noexcept { return idx_; }
    Index operator[](std::size_t i) const { return idx_[i]; }
    auto begin() const noexcept { return idx_.begin(); }
    auto end() const noexcept { return idx_.end(); }

    bool contains(Index j) const { return std::binary_search(idx_.begin(), idx_.end(), j); }

    /// Position of j inside the support, if present.
    std::optional<std::size_t> position(Index j) const {
        auto it = std::lower_bound(idx_.begin(), idx_.end(), j);
        if (it == idx_.end() || *it != j) return std::nullopt;
        return static_cast<std::size_t>(it - idx_.begin());
    }

    SupportSet with(Index j) const {
        if (contains(j)) return *this;
        auto v = idx_;
        v.push_back(j);
        return SupportSet(std::move(v));
    }

    SupportSet set_union(const SupportSet& o) const {
        std::vector<Index> v;
        v.reserve(size() + o.size());
        std::set_union(idx_.begin(), idx_.end(), o.idx_.begin(), o.idx_.end(), std::back_inserter(v));
        SupportSet s;
        s.idx_ = std::move(v);
        return s;
    }

    bool is_subset_of(const SupportSet& o) const {
        return std::includes(o.idx_.begin(), o.idx_.end(), idx_.begin(), idx_.end());
    }

    void check_range(Index p) const {
        if (!idx_.empty() && (idx_.front() < 0 || idx_.back() >= p))
            throw validation_error("support index out of range");
    }

    std::string to_string() const {
        std::string s = "{";
        for (std::size_t i = 0; i < idx_.size(); ++i) {
            if (i) s += ",";
            s += std::to_string(idx_[i]);
        }
        return s + "}";
    }

    friend bool operator==(const SupportSet&, const SupportSet&) = default;
    friend auto operator<=>(const SupportSet& a, const SupportSet& b) {
        // shorter models first, then lexicographic
        if (a.size() != b.size()) return a.size() <=> b.size();
        return a.idx_ <=> b.idx_;
    }

private:
    std::vector<Index> idx_;
};

/// Columns of x restricted to a support.
inline Matrix restrict_columns(const Matrix& x, const SupportSet& s) {
    Matrix out(x.rows(), static_cast<Index>(s.size()));
    for (std::size_t k = 0; k < s.size(); ++k) out.col(static_cast<Index>(k)) = x.col(s[k]);
    return out;
}

/// A model plus coefficients on that model.
struct ThetaPoint {
    SupportSet support;
    Vector coef;

    ThetaPoint() = default;
    ThetaPoint(SupportSet s, Vector b) : support(std::move(s)), coef(std::move(b)) {
        if (static_cast<std::size_t>(coef.size()) != support.size())
            throw validation_error("dimension mismatch: coefficient length differs from support size");
        if (!coef.allFinite()) throw validation_error("non-finite coefficient");
    }

    Vector linear_predictor(const Matrix& x) const {
        Vector eta = Vector::Zero(x.rows());
        for (std::size_t k = 0; k < support.size(); ++k) eta += coef[static_cast<Index>(k)] * x.col(support[k]);
        return eta;
    }

    Vector dense(Index p) const {
        Vector b = Vector::Zero(p);
        for (std::size_t k = 0; k < support.size(); ++k) b[support[k]] = coef[static_cast<Index>(k)];
        return b;
    }
};

/// Where each candidate model came from.
struct Provenance {
    std::size_t draw = 0;
    double xi = 0.0;
};

/// Deduplicated list of candidate models with provenance, in order of first
/// appearance.
class CandidateSet {
public:
    CandidateSet() = default;
    explicit CandidateSet(std::vector<SupportSet> models) {
        for (auto& m : models) add(std::move(m), {});
    }

    /// Returns true if the model was new.
    bool add(SupportSet model, std::optional<Provenance> origin) {
        for (std::size_t i = 0; i < models_.size(); ++i) {
            if (models_[i] == model) {
                if (origin) provenance_[i].push_back(*origin);
                return false;
            }
        }
        models_.push_back(std::move(model));
        provenance_.emplace_back();
        if (origin) provenance_.back().push_back(*origin);
        return true;
    }

    std::size_t size() const noexcept { return models_.size(); }
    bool empty() const noexcept { return models_.empty(); }
    const std::vector<SupportSet>& models() const noexcept { return models_; }
    const std::vector<std::vector<Provenance>>& provenance() const noexcept { return provenance_; }

    bool contains(const SupportSet& s) const {
        return std::find(models_.begin(), models_.end(), s) != models_.end();
    }

    std::size_t failed_draws = 0;

private:
    std::vector<SupportSet> models_;
    std::vector<std::vector<Provenance>> provenance_;
};

enum class Loss { logistic, hinge };
enum class BetaMode { mle, profile };
enum class AdaptiveWeights { global, per_coordinate };

inline std::string to_string(Loss l) { return l == Loss::logistic ? "logistic" : "hinge"; }
inline std::string to_string(BetaMode b) { return b == BetaMode::mle ? "mle" : "profile"; }

inline Loss parse_loss(const std::string& s) {
    if (s == "logistic") return Loss::logistic;
    if (s == "hinge") return Loss::hinge;
    throw validation_error("unknown loss: " + s);
}

inline BetaMode parse_beta_mode(const std::string& s) {
    if (s == "mle") return BetaMode::mle;
    if (s == "profile") return BetaMode::profile;
    throw validation_error("unknown beta mode: " + s);
}

/// Default cardinality cap for candidate models, ceil(n / (2 log p)).
inline std::size_t default_max_support(Index n, Index p) {
    const double lp = std::log(static_cast<double>(std::max<Index>(p, 3)));
    return static_cast<std::size_t>(std::max(1.0, std::ceil(static_cast<double>(n) / (2.0 * lp))));
}

/// Settings shared by the inference procedures. alpha is the coverage
/// target (0.95 means 95% confidence).
struct InferenceConfig {
    double alpha = 0.95;
    std::size_t d = 100;
    std::size_t m = 100;
    Loss loss = Loss::logistic;
    std::uint64_t seed = 1;
    std::optional<std::size_t> max_support;  // defaults to ceil(n / (2 log p))
    BetaMode beta_mode = BetaMode::mle;
    AdaptiveWeights adaptive_weights = AdaptiveWeights::global;
    std::vector<Index> unpenalized;  // columns exempt from penalties
    std::size_t threads = 1;
    std::size_t profile_max_evals = 200;

    void validate() const {
        if (!(alpha > 0.0 && alpha < 1.0)) throw validation_error("alpha must lie in (0,1)");
        if (d < 1) throw validation_error("d must be at least 1");
        if (m < 1) throw validation_error("m must be at least 1");
        if (max_support && *max_support < 1) throw validation_error("max_support must be at least 1");
        if (threads < 1) throw validation_error("threads must be at least 1");
    }

    std::size_t support_cap(Index n, Index p) const {
        return max_support ? *max_support : default_max_support(n, p);
    }
};

/// Matrix A of q linear combinations over all p coefficients.
class LinearTarget {
public:
    LinearTarget() = default;
    explicit LinearTarget(Matrix a) : a_(std::move(a)) {
        if (a_.rows() < 1) throw validation_error("linear target needs at least one row");
        if (!a_.allFinite()) throw validation_error("non-finite entry in linear target");
    }

    static LinearTarget unit(Index p, Index j) {
        Matrix a = Matrix::Zero(1, p);
        a(0, j) = 1.0;
        return LinearTarget(std::move(a));
    }

    static LinearTarget identity(Index p) { return LinearTarget(Matrix::Identity(p, p)); }

    Index q() const noexcept { return a_.rows(); }
    Index p() const noexcept { return a_.cols(); }
    const Matrix& matrix() const noexcept { return a_; }

    Matrix restricted(const SupportSet& s) const { return restrict_columns(a_, s); }

private:
    Matrix a_;
};

/// Column centering and scaling, kept so results can be mapped back.
struct Standardization {
    Vector mean;
    Vector scale;
    std::vector<bool> constant;

    Matrix apply(const Matrix& x) const {
        Matrix z = x;
        for (Index j = 0; j < x.cols(); ++j) z.col(j) = (x.col(j).array() - mean[j]) / scale[j];
        return z;
    }

    Matrix invert(const Matrix& z) const {
        Matrix x = z;
        for (Index j = 0; j < z.cols(); ++j) x.col(j) = z.col(j).array() * scale[j] + mean[j];
        return x;
    }
};

/// Centers every column and divides by its sample standard deviation
/// (divisor n-1). Constant columns are only centered and flagged.
inline std::pair<Dataset, Standardization> standardize_columns(const Dataset& data) {
    const Index n = data.n();
    if (n < 2) throw validation_error("standardization needs at least two rows");
    Standardization st;
    st.mean = data.x().colwise().mean().transpose();
    st.scale = Vector::Ones(data.p());
    st.constant.assign(static_cast<std::size_t>(data.p()), false);
    for (Index j = 0; j < data.p(); ++j) {
        const double ss = (data.x().col(j).array() - st.mean[j]).square().sum();
        const double sd = std::sqrt(ss / static_cast<double>(n - 1));
        const double ref = std::max(1.0, std::abs(st.mean[j]));
        if (sd <= 1e-14 * ref) {
            st.constant[static_cast<std::size_t>(j)] = true;
        } else {
            st.scale[j] = sd;
        }
    }
    Matrix z = st.apply(data.x());
    for (Index j = 0; j < data.p(); ++j)
        if (st.constant[static_cast<std::size_t>(j)]) z.col(j).setZero();
    return {validate_dataset(std::move(z), data.y()), std::move(st)};
}

}  // namespace repro
