#pragma once

#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace covercall::aspath {

using AsNumber = int;

struct PathUnknown : std::runtime_error {
  PathUnknown(AsNumber from, AsNumber to)
      : std::runtime_error("no valley-free path from AS" +
                           std::to_string(from) + " to AS" +
                           std::to_string(to)) {}
};

struct BadTopology : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// AS relationship graph plus address-to-AS membership. Fixture format, one
// entry per line:
//   rel <asA> <asB> customer    # asA is a customer of asB
//   rel <asA> <asB> provider    # asA is a provider of asB
//   rel <asA> <asB> peer
//   net <address-or-prefix> <asn>   # trailing '.' makes it a prefix match
class AsTopology {
 public:
  void add_customer_of(AsNumber customer, AsNumber provider);
  void add_peers(AsNumber a, AsNumber b);
  void map_net(const std::string& addr_or_prefix, AsNumber asn);

  const std::set<AsNumber>& ases() const { return ases_; }
  std::vector<AsNumber> providers_of(AsNumber x) const;
  std::vector<AsNumber> customers_of(AsNumber x) const;
  std::vector<AsNumber> peers_of(AsNumber x) const;

  std::optional<AsNumber> as_of(const std::string& addr) const;

  static AsTopology parse(const std::string& text);
  static AsTopology load(const std::string& path);

 private:
  std::map<AsNumber, std::set<AsNumber>> providers_;
  std::map<AsNumber, std::set<AsNumber>> customers_;
  std::map<AsNumber, std::set<AsNumber>> peers_;
  std::set<AsNumber> ases_;
  std::vector<std::pair<std::string, AsNumber>> nets_;
};

class AsPathProvider {
 public:
  virtual ~AsPathProvider() = default;
  // AS-level path from `from` to `to`, inclusive. Throws PathUnknown.
  virtual std::vector<AsNumber> path(AsNumber from, AsNumber to) const = 0;
};

// Route prediction in the Gao-Rexford style: a path must climb providers,
// cross at most one peering link, then descend customers. Route choice
// prefers customer routes over peer routes over provider routes, then the
// shortest AS path, then the lexicographically smallest AS sequence (which
// matches picking the lowest next AS number at every hop).
class ValleyFreeProvider : public AsPathProvider {
 public:
  explicit ValleyFreeProvider(const AsTopology& topo) : topo_(topo) {}
  std::vector<AsNumber> path(AsNumber from, AsNumber to) const override;

 private:
  const AsTopology& topo_;
};

// First AS of `path` (walked source to destination) that belongs to
// `censor_ases`; nullopt when the path never enters.
std::optional<AsNumber> entry_point(const std::vector<AsNumber>& path,
                                    const std::set<AsNumber>& censor_ases);

}  // namespace covercall::aspath
