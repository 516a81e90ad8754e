#ifndef EHNET_POLICY_IO_HPP
#define EHNET_POLICY_IO_HPP

#include <cstdint>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "ehnet/errors.hpp"
#include "ehnet/network_model.hpp"
#include "ehnet/solver.hpp"

namespace ehnet {

/// Fingerprint of everything an alpha set depends on: the tables and gamma.
inline std::uint64_t policy_model_hash(const NetworkModel& model, double gamma) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "gamma=%.17g\n", gamma);
    return fnv1a(model.canonical() + buf);
}

/// Text dump of an alpha set:
///
///     # ehnet policy model_hash=<hex> [extra]
///     states <N> alphas <K>
///     <ordinal> <action name> <v_0> ... <v_N-1>
inline void write_policy(std::ostream& os, const PolicySet& policy, const NetworkModel& model, double gamma,
                         const std::string& extra = {}) {
    os << "# ehnet policy model_hash=" << hex64(policy_model_hash(model, gamma));
    if (!extra.empty()) os << ' ' << extra;
    os << "\nstates " << model.num_states() << " alphas " << policy.alphas.size() << '\n';
    char buf[32];
    for (const AlphaVector& a : policy.alphas) {
        os << a.ordinal << ' ' << a.action.name();
        for (Eigen::Index s = 0; s < a.values.size(); ++s) {
            std::snprintf(buf, sizeof buf, " %.17g", a.values(s));
            os << buf;
        }
        os << '\n';
    }
}

/// Loads a dump written by write_policy, refusing one built for another model.
inline PolicySet read_policy(std::istream& in, const NetworkModel& model, double gamma) {
    std::string header;
    if (!std::getline(in, header)) throw ModelMismatch("policy file is empty");
    const std::string want = "model_hash=" + hex64(policy_model_hash(model, gamma));
    if (header.rfind("# ehnet policy ", 0) != 0) throw ModelMismatch("not a policy file");
    std::istringstream hs(header.substr(15));
    std::string field;
    hs >> field;
    if (field != want) throw ModelMismatch("policy was built for a different model (" + field + ", expected " + want + ")");

    std::string kw1, kw2;
    int n_states = 0;
    std::size_t count = 0;
    if (!(in >> kw1 >> n_states >> kw2 >> count) || kw1 != "states" || kw2 != "alphas")
        throw ModelMismatch("malformed policy header");
    if (n_states != model.num_states()) throw ModelMismatch("policy state count differs from the model");

    PolicySet out;
    out.alphas.reserve(count);
    for (std::size_t k = 0; k < count; ++k) {
        AlphaVector a;
        std::string name;
        if (!(in >> a.ordinal >> name)) throw ModelMismatch("truncated policy file");
        if (a.ordinal < 0 || a.ordinal >= model.num_actions()) throw ModelMismatch("action ordinal out of range");
        a.action = model.action(a.ordinal);
        if (a.action.name() != name) throw ModelMismatch("action tag '" + name + "' does not match its ordinal");
        a.values.resize(n_states);
        for (int s = 0; s < n_states; ++s)
            if (!(in >> a.values(s))) throw ModelMismatch("truncated policy file");
        out.alphas.push_back(std::move(a));
    }
    return out;
}

/// Convergence log, one row per backup.
inline void write_convergence_csv(std::ostream& os, const std::vector<IterationRecord>& log,
                                  const std::string& header_comment = {}) {
    if (!header_comment.empty()) os << "# " << header_comment << '\n';
    os << "iteration,residual,alpha_count,wall_ms\n";
    char buf[128];
    for (const IterationRecord& r : log) {
        std::snprintf(buf, sizeof buf, "%d,%.17g,%d,%.3f\n", r.iteration, r.residual, r.alpha_count, r.wall_ms);
        os << buf;
    }
}

} // namespace ehnet

#endif // EHNET_POLICY_IO_HPP
