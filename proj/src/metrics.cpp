#include <uvd/metrics.hpp>

#include <json.hpp>

#include <stdexcept>
#include <unordered_map>

namespace uvd {

namespace {

// relabel arbitrary ids to 0..k-1
std::vector<int> compact(const std::vector<int>& labels, int& k) {
    std::unordered_map<int, int> ids;
    std::vector<int> out(labels.size());
    for (size_t i = 0; i < labels.size(); ++i) {
        auto [it, inserted] = ids.try_emplace(labels[i], static_cast<int>(ids.size()));
        out[i] = it->second;
    }
    k = static_cast<int>(ids.size());
    return out;
}

inline unsigned long long pairs2(unsigned long long n) { return n * (n - 1) / 2; }

}  // namespace

double ari(const std::vector<int>& labels_true, const std::vector<int>& labels_pred) {
    if (labels_true.size() != labels_pred.size()) throw std::invalid_argument("ari: length mismatch");
    const unsigned long long n = labels_true.size();
    if (n < 2) return 1.0;

    int ka = 0, kb = 0;
    const std::vector<int> a = compact(labels_true, ka);
    const std::vector<int> b = compact(labels_pred, kb);

    std::vector<unsigned long long> cont(static_cast<size_t>(ka) * kb, 0);
    std::vector<unsigned long long> arow(ka, 0), bcol(kb, 0);
    for (size_t i = 0; i < a.size(); ++i) {
        cont[static_cast<size_t>(a[i]) * kb + b[i]]++;
        arow[a[i]]++;
        bcol[b[i]]++;
    }

    unsigned long long sum_ij = 0, sum_a = 0, sum_b = 0;
    for (unsigned long long c : cont) sum_ij += pairs2(c);
    for (unsigned long long c : arow) sum_a += pairs2(c);
    for (unsigned long long c : bcol) sum_b += pairs2(c);
    const unsigned long long total = pairs2(n);

    // degenerate by convention: both constant, or both all-singletons
    if ((sum_a == total && sum_b == total) || (sum_a == 0 && sum_b == 0)) return 1.0;

    const double expected = static_cast<double>(sum_a) * static_cast<double>(sum_b) / static_cast<double>(total);
    const double max_index = 0.5 * (static_cast<double>(sum_a) + static_cast<double>(sum_b));
    return (static_cast<double>(sum_ij) - expected) / (max_index - expected);
}

double f_ari(const std::vector<int>& labels_true, const std::vector<int>& labels_pred, int background_id) {
    if (labels_true.size() != labels_pred.size()) throw std::invalid_argument("f_ari: length mismatch");
    std::vector<int> ft, fp;
    ft.reserve(labels_true.size());
    fp.reserve(labels_true.size());
    for (size_t i = 0; i < labels_true.size(); ++i) {
        if (labels_true[i] != background_id) {
            ft.push_back(labels_true[i]);
            fp.push_back(labels_pred[i]);
        }
    }
    if (ft.empty()) throw std::invalid_argument("f_ari: no foreground samples");
    return ari(ft, fp);
}

double mse(const std::vector<double>& x, const std::vector<double>& x_hat) {
    if (x.size() != x_hat.size()) throw std::invalid_argument("mse: shape mismatch");
    if (x.empty()) throw std::invalid_argument("mse: empty input");
    double acc = 0.0;
    for (size_t i = 0; i < x.size(); ++i) {
        const double d = x[i] - x_hat[i];
        acc += d * d;
    }
    return acc / static_cast<double>(x.size());
}

std::string MetricsReport::to_json() const {
    nlohmann::json j;
    for (const auto& [len, s] : per_length) {
        nlohmann::json row;
        row["ari"] = s.ari;
        if (s.f_ari.has_value())
            row["f_ari"] = *s.f_ari;
        else
            row["f_ari"] = nullptr;
        row["mse"] = s.mse;
        j["lengths"][std::to_string(len)] = row;
    }
    if (j.is_null()) j = nlohmann::json::object();
    return j.dump(2);
}

}  // namespace uvd
