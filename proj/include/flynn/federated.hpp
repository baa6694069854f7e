#pragma once

#include <chrono>
#include <cstdint>
#include <exception>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "flynn/classifier.hpp"
#include "flynn/dataset.hpp"
#include "flynn/dp.hpp"
#include "flynn/error.hpp"
#include "flynn/transport.hpp"
#include "flynn/wire.hpp"

namespace flynn {

// Rank-order binary tree over party ids: 0 is the root, children of i are
// 2i+1 and 2i+2. Any pairing yields the same aggregate; this one is
// deterministic in tau alone.
inline std::optional<PartyId> tree_parent(PartyId id) {
  if (id == 0) return std::nullopt;
  return (id - 1) / 2;
}

inline std::vector<PartyId> tree_children(PartyId id, std::uint32_t tau) {
  std::vector<PartyId> out;
  for (PartyId c : {2 * id + 1, 2 * id + 2})
    if (c < tau) out.push_back(c);
  return out;
}

enum class TransportKind { kInProc, kTcp };

// One-round multi-party training plan: disjoint shards, shared hash
// parameters, optional privatization, transport choice.
struct FederationPlan {
  std::vector<Dataset> shards;
  std::uint32_t m = 0;
  std::uint32_t s = 0;
  std::uint32_t rho = 0;
  std::string gamma_text = "0";
  bool is_dp = false;
  DpParams dp;  // dp.epsilon is the GLOBAL budget; parties use epsilon / tau
  TransportKind transport = TransportKind::kInProc;
  std::uint64_t root_seed = 0;
  std::chrono::milliseconds timeout = std::chrono::seconds(120);

  std::uint32_t tau() const {
    return static_cast<std::uint32_t>(shards.size());
  }
};

struct PartyStats {
  ByteMeter meter;
  double train_seconds = 0.0;
};

struct FederationResult {
  std::vector<FlyNnModel> models;  // one per party; equal on the non-DP path
  std::vector<PartyStats> parties;
  std::uint64_t broadcast_seed = 0;
  double wall_seconds = 0.0;
  std::uint64_t model_nonzeros = 0;  // density of the aggregated counts

  std::uint64_t total_bytes_sent() const {
    std::uint64_t total = 0;
    for (const auto& p : parties) total += p.meter.sent;
    return total;
  }
  std::uint64_t total_bytes_received() const {
    std::uint64_t total = 0;
    for (const auto& p : parties) total += p.meter.received;
    return total;
  }
};

namespace detail {

inline Bytes encode_label_table(const std::vector<std::string>& table) {
  ByteWriter w;
  w.varint(table.size());
  for (const auto& label : table) w.str(label);
  return w.take();
}

inline std::vector<std::string> decode_label_table(const Bytes& payload) {
  ByteReader r(payload);
  std::vector<std::string> table(r.varint());
  for (auto& label : table) label = r.str();
  return table;
}

inline Bytes encode_counts(const ClassCounts& counts) {
  ByteWriter w;
  w.u32(counts.num_classes());
  w.u32(counts.bits());
  for (std::uint32_t v : counts.values()) w.u32(v);
  return w.take();
}

inline ClassCounts decode_counts(const Bytes& payload) {
  ByteReader r(payload);
  const std::uint32_t classes = r.u32();
  const std::uint32_t bits = r.u32();
  ClassCounts counts(classes, bits);
  for (auto& v : counts.values()) v = r.u32();
  if (r.remaining() != 0) throw DataError("counts message: trailing bytes");
  return counts;
}

inline Message expect(Endpoint& ep, PartyId from, MessageKind kind) {
  Message msg = ep.recv(from);
  if (msg.kind == MessageKind::kAbort)
    throw TransportError("federation aborted: " +
                         std::string(msg.payload.begin(), msg.payload.end()));
  if (msg.kind != kind)
    throw TransportError("unexpected message kind from party " +
                         std::to_string(from));
  return msg;
}

// Leaf-to-root combine followed by root-to-leaf distribution; every party
// ends with the identical aggregate. Communication is 2 rounds of O(log tau)
// depth.
template <typename T, typename Combine, typename Encode, typename Decode>
T tree_all_reduce(Endpoint& ep, std::uint32_t tau, MessageKind kind, T local,
                  Combine combine, Encode encode, Decode decode) {
  const auto children = tree_children(ep.id(), tau);
  for (PartyId child : children)
    local = combine(std::move(local), decode(expect(ep, child, kind).payload));
  T result = std::move(local);
  if (const auto parent = tree_parent(ep.id())) {
    ep.send(*parent, kind, encode(result));
    result = decode(expect(ep, *parent, kind).payload);
  }
  for (PartyId child : children) ep.send(child, kind, encode(result));
  return result;
}

}  // namespace detail

// All-reduce of integer class counts (element-wise sum, bit-exact).
inline ClassCounts tree_all_reduce_counts(Endpoint& ep, std::uint32_t tau,
                                          ClassCounts local) {
  return detail::tree_all_reduce(
      ep, tau, MessageKind::kCounts, std::move(local),
      [](ClassCounts a, const ClassCounts& b) { return merge_counts(a, b); },
      detail::encode_counts, detail::decode_counts);
}

// All-reduce of sparse privatized counts (element-wise real sum).
inline PrivatizedCounts tree_all_reduce_sparse(Endpoint& ep, std::uint32_t tau,
                                               PrivatizedCounts local) {
  return detail::tree_all_reduce(
      ep, tau, MessageKind::kSparseCounts, std::move(local),
      [](PrivatizedCounts a, const PrivatizedCounts& b) {
        return merge_privatized(a, b);
      },
      [](const PrivatizedCounts& v) { return sparse_encode(v); },
      [](const Bytes& payload) { return sparse_decode(payload); });
}

// Root generates the shared hash seed and pushes it down the tree; every
// other party receives it from its parent and forwards it. tau - 1 messages.
inline std::uint64_t broadcast_seed(Endpoint& ep, std::uint32_t tau,
                                    std::uint64_t root_seed) {
  std::uint64_t seed;
  if (ep.id() == 0) {
    seed = Rng(root_seed).substream_seed(rng_tag::kFederation);
  } else {
    seed = ByteReader(
               detail::expect(ep, *tree_parent(ep.id()), MessageKind::kSeed)
                   .payload)
               .u64();
  }
  ByteWriter w;
  w.u64(seed);
  const Bytes payload = w.take();
  for (PartyId child : tree_children(ep.id(), tau))
    ep.send(child, MessageKind::kSeed, payload);
  return seed;
}

// Setup handshake: label tables flow leaf-to-root and every parent verifies
// its children's tables against its own, so a federation with inconsistent
// label vocabularies aborts before any training.
inline void verify_label_tables(Endpoint& ep, std::uint32_t tau,
                                const std::vector<std::string>& own) {
  for (PartyId child : tree_children(ep.id(), tau)) {
    const auto theirs = detail::decode_label_table(
        detail::expect(ep, child, MessageKind::kLabelTable).payload);
    if (theirs != own)
      throw DataError("label table mismatch between party " +
                      std::to_string(ep.id()) + " and party " +
                      std::to_string(child));
  }
  if (const auto parent = tree_parent(ep.id()))
    ep.send(*parent, MessageKind::kLabelTable, detail::encode_label_table(own));
}

namespace detail {

struct PartyOutcome {
  std::optional<FlyNnModel> model;
  PartyStats stats;
  std::uint64_t seed = 0;
  std::uint64_t nonzeros = 0;
};

inline PartyOutcome run_party(const FederationPlan& plan, Endpoint& ep) {
  const std::uint32_t tau = plan.tau();
  const Dataset& shard = plan.shards[ep.id()];

  verify_label_tables(ep, tau, shard.label_table());
  const std::uint64_t seed = broadcast_seed(ep, tau, plan.root_seed);

  const HashConfig hash_config{HashKind::kFly, seed, plan.m, shard.dim(),
                               plan.s, plan.rho};
  const auto train_start = std::chrono::steady_clock::now();
  const Hasher hasher = make_hasher(hash_config);
  ClassCounts counts(shard.num_classes(), plan.m);
  for (std::size_t i = 0; i < shard.size(); ++i)
    counts.record(shard.label(i), apply_hash(hasher, shard.row(i)));
  const auto train_end = std::chrono::steady_clock::now();

  PartyOutcome outcome;
  outcome.seed = seed;
  outcome.stats.train_seconds =
      std::chrono::duration<double>(train_end - train_start).count();

  if (!plan.is_dp) {
    ClassCounts merged = tree_all_reduce_counts(ep, tau, std::move(counts));
    std::uint64_t nonzeros = 0;
    for (std::uint32_t v : merged.values()) nonzeros += v != 0;
    outcome.nonzeros = nonzeros;
    outcome.model.emplace(hash_config, plan.gamma_text, shard.label_table(),
                          std::move(merged));
  } else {
    DpParams party_params = plan.dp;
    party_params.epsilon = plan.dp.epsilon / tau;
    Rng dp_rng = Rng(seed).substream(rng_tag::kDpNoise).substream(ep.id());
    PrivatizedCounts privatized =
        privatize(counts.values(), party_params, dp_rng);
    PrivatizedCounts merged =
        tree_all_reduce_sparse(ep, tau, std::move(privatized));
    outcome.nonzeros = merged.nonzeros();
    outcome.model.emplace(hash_config, plan.gamma_text, shard.label_table(),
                          to_dense(merged), shard.num_classes());
  }
  outcome.stats.meter = ep.meter();
  return outcome;
}

}  // namespace detail

inline void validate_plan(const FederationPlan& plan) {
  if (plan.shards.empty()) throw ConfigError("federation: no shards");
  if (plan.m < 1 || plan.s < 1 || plan.rho < 1 || plan.rho > plan.m)
    throw ConfigError("federation: invalid hash parameters");
  // Empty shards are legal (a party may simply hold no data for any class);
  // they contribute zero counts to the aggregate.
  const auto& first = plan.shards.front();
  for (const auto& shard : plan.shards)
    if (shard.dim() != first.dim())
      throw DataError("federation: shard dimension mismatch");
  if (plan.is_dp)
    plan.dp.validate(static_cast<std::uint64_t>(plan.m) *
                     first.num_classes());
  FlyNnModel::parse_gamma(plan.gamma_text);
}

// One-round federated training. Every party trains on its own shard,
// optionally privatizes its counts with budget epsilon/tau, and a single
// tree all-reduce leaves the identical aggregated model on every party.
// The non-private path reproduces centralized training on the pooled shards
// exactly, whatever the shard partition looks like.
inline FederationResult train_flynn_fl(const FederationPlan& plan) {
  validate_plan(plan);
  const std::uint32_t tau = plan.tau();
  const auto wall_start = std::chrono::steady_clock::now();

  std::vector<std::unique_ptr<Endpoint>> endpoints(tau);
  std::shared_ptr<InProcHub> hub;
  if (plan.transport == TransportKind::kInProc || tau == 1) {
    hub = std::make_shared<InProcHub>(tau, plan.timeout);
    for (PartyId t = 0; t < tau; ++t)
      endpoints[t] = std::make_unique<InProcEndpoint>(hub, t);
  } else {
    std::vector<std::uint16_t> roster(tau);
    std::vector<std::unique_ptr<TcpEndpoint>> tcp(tau);
    for (PartyId t = 0; t < tau; ++t) {
      tcp[t] = std::make_unique<TcpEndpoint>(t, tau, plan.timeout);
      roster[t] = tcp[t]->port();
    }
    for (PartyId t = 0; t < tau; ++t) {
      tcp[t]->set_roster(roster);
      endpoints[t] = std::move(tcp[t]);
    }
  }

  std::vector<detail::PartyOutcome> outcomes(tau);
  std::vector<std::thread> workers;
  std::mutex error_mutex;
  std::exception_ptr first_error;

  for (PartyId t = 0; t < tau; ++t) {
    workers.emplace_back([&, t] {
      try {
        outcomes[t] = detail::run_party(plan, *endpoints[t]);
      } catch (...) {
        {
          std::lock_guard lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
        }
        if (hub) hub->abort("party " + std::to_string(t) + " failed");
      }
    });
  }
  for (auto& worker : workers) worker.join();
  if (first_error) std::rethrow_exception(first_error);

  FederationResult result;
  result.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                    wall_start)
          .count();
  result.broadcast_seed = outcomes.front().seed;
  result.model_nonzeros = outcomes.front().nonzeros;
  for (auto& outcome : outcomes) {
    result.models.push_back(std::move(*outcome.model));
    result.parties.push_back(outcome.stats);
  }
  return result;
}

}  // namespace flynn
