#include "covercall/netsim.hpp"

#include <algorithm>

namespace covercall::sim {

CensorAttack::Kind attack_kind_from_name(const std::string& name) {
  if (name == "none") return CensorAttack::Kind::None;
  if (name == "drop_all_to_callee") return CensorAttack::Kind::DropAllToCallee;
  if (name == "rewrite_ok_address") return CensorAttack::Kind::RewriteOkAddress;
  if (name == "replay_to_callee") return CensorAttack::Kind::ReplayToCallee;
  if (name == "alter_rtp") return CensorAttack::Kind::AlterRtp;
  if (name == "drop_random") return CensorAttack::Kind::DropRandom;
  throw std::runtime_error("unknown attack kind '" + name + "'");
}

void ObservationLog::observe(const ObservationEntry& e,
                             const net::Datagram& d) {
  entries_.push_back(e);
  if (e.kind != net::DatagramKind::Sip) return;
  try {
    const auto m = sip::parse(d.payload);
    sip_kinds_.emplace_back(e.t, m.kind);
    if (m.kind == sip::Kind::Ok && m.sdp) {
      // The registered address behind a callee SIP ID, as the censor sees it.
      bindings_[m.callee_id].insert(m.sdp->media_address);
    }
  } catch (const sip::ParseError&) {
  }
}

std::size_t ObservationLog::count_sip(sip::Kind kind) const {
  return static_cast<std::size_t>(
      std::count_if(sip_kinds_.begin(), sip_kinds_.end(),
                    [&](const auto& p) { return p.second == kind; }));
}

Simulator::Simulator(SimConfig config, const aspath::AsTopology* topo)
    : config_(std::move(config)), topo_(topo), rng_(config_.seed) {}

void Simulator::call_at(net::TimeMs t, std::function<void()> fn) {
  queue_.push(Event{std::max(t, now_), event_seq_++, std::move(fn)});
}

void Simulator::register_endpoint(const std::string& addr, Handler handler) {
  endpoints_[addr] = std::move(handler);
}

void Simulator::register_sink(const std::string& addr) { sinks_[addr]; }

bool Simulator::endpoint_known(const std::string& addr) const {
  return endpoints_.count(addr) > 0 || sinks_.count(addr) > 0;
}

net::DatagramTransport& Simulator::transport_for(const std::string& addr,
                                                 bool supports_spoofing) {
  auto it = transports_.find(addr);
  if (it == transports_.end()) {
    it = transports_
             .emplace(addr, std::make_unique<NodeTransport>(
                                *this, addr, supports_spoofing))
             .first;
  }
  return *it->second;
}

bool Simulator::censored(const std::string& addr) const {
  if (!topo_ || config_.censor_ases.empty()) return false;
  const auto as = topo_->as_of(addr);
  return as && config_.censor_ases.count(*as) > 0;
}

std::uint64_t Simulator::sink_received(const std::string& addr) const {
  auto it = sinks_.find(addr);
  return it == sinks_.end() ? 0 : it->second;
}

Simulator::AttackAction Simulator::apply_attack(net::Datagram& d) {
  CensorAttack& atk = *config_.attack;
  if (now_ < atk.active_from_ms || now_ >= atk.active_until_ms)
    return AttackAction::Pass;

  const bool media = d.kind == net::DatagramKind::Rtp ||
                     d.kind == net::DatagramKind::Rtcp;
  auto nth_or_prob = [&]() {
    if (atk.every_nth > 0)
      return ++attack_match_counter_ % atk.every_nth == 0;
    std::bernoulli_distribution hit(atk.probability);
    return hit(rng_);
  };

  switch (atk.kind) {
    case CensorAttack::Kind::None:
      return AttackAction::Pass;

    case CensorAttack::Kind::DropAllToCallee: {
      // Outbound media, i.e. what the censor believes flows to the callee.
      if (!media || censored(d.dst.addr)) return AttackAction::Pass;
      if (!atk.target_addr.empty() && d.dst.addr != atk.target_addr)
        return AttackAction::Pass;
      ++attack_dropped_;
      return AttackAction::Drop;
    }

    case CensorAttack::Kind::RewriteOkAddress: {
      if (d.kind != net::DatagramKind::Sip) return AttackAction::Pass;
      try {
        auto m = sip::parse(d.payload);
        if (m.kind != sip::Kind::Ok || !m.sdp) return AttackAction::Pass;
        m.sdp->media_address = atk.target_addr;
        if (atk.rewrite_port != 0) m.sdp->rtp_port = atk.rewrite_port;
        const std::string text = sip::serialize(m);
        d.payload.assign(text.begin(), text.end());
        ++attack_rewritten_oks_;
      } catch (const sip::ParseError&) {
      }
      return AttackAction::Pass;
    }

    case CensorAttack::Kind::ReplayToCallee: {
      if (!media || !nth_or_prob()) return AttackAction::Pass;
      ++replays_injected_;
      if (censored(d.dst.addr)) ++replays_injected_inbound_;
      const net::Datagram copy = d;
      call_at(now_ + atk.replay_delay_ms, [this, copy] { transfer(copy); });
      return AttackAction::Pass;
    }

    case CensorAttack::Kind::AlterRtp: {
      // Flip a ciphertext bit on inbound RTP; authentication must catch it.
      if (d.kind != net::DatagramKind::Rtp || !censored(d.dst.addr))
        return AttackAction::Pass;
      if (!nth_or_prob()) return AttackAction::Pass;
      if (!d.payload.empty()) {
        d.payload.back() ^= 0x01;
        ++attack_altered_;
      }
      return AttackAction::Pass;
    }

    case CensorAttack::Kind::DropRandom: {
      if (!media || !nth_or_prob()) return AttackAction::Pass;
      ++attack_dropped_;
      return AttackAction::Drop;
    }
  }
  return AttackAction::Pass;
}

void Simulator::transfer(const net::Datagram& d) {
  if (config_.loss_rate > 0.0) {
    std::bernoulli_distribution lost(config_.loss_rate);
    if (lost(rng_)) {
      ++dropped_loss_;
      return;
    }
  }
  net::TimeMs delay = config_.base_delay_ms;
  if (config_.jitter_ms > 0) {
    std::uniform_int_distribution<net::TimeMs> jitter(0, config_.jitter_ms);
    delay += jitter(rng_);
    if (config_.reorder_rate > 0.0) {
      std::bernoulli_distribution reorder(config_.reorder_rate);
      if (reorder(rng_)) delay += jitter(rng_);
    }
  }
  const net::Datagram delivered_copy = d;
  call_at(now_ + delay, [this, delivered_copy] {
    auto sink = sinks_.find(delivered_copy.dst.addr);
    if (sink != sinks_.end()) {
      ++sink->second;
      ++delivered_;
      return;
    }
    auto it = endpoints_.find(delivered_copy.dst.addr);
    if (it == endpoints_.end()) return;  // endpoint left the simulation
    ++delivered_;
    it->second(delivered_copy, now_);
  });
}

void Simulator::send(const net::Datagram& d) {
  if (!endpoint_known(d.dst.addr)) throw UnknownEndpoint(d.dst.addr);
  net::Datagram in_flight = d;
  const bool crosses = censored(d.claimed_src.addr) != censored(d.dst.addr);
  if (crosses) {
    censor_.observe(
        ObservationEntry{now_, d.claimed_src, d.dst, d.kind, d.payload.size()},
        d);
    if (config_.attack &&
        apply_attack(in_flight) == AttackAction::Drop) {
      return;
    }
  }
  transfer(in_flight);
}

void Simulator::run_until(net::TimeMs t) {
  while (!queue_.empty() && queue_.top().t <= t) {
    Event ev = queue_.top();
    queue_.pop();
    now_ = ev.t;
    ev.fn();
  }
  now_ = std::max(now_, t);
}

SipProxy::SipProxy(Simulator& sim, const std::string& addr, std::uint16_t port)
    : sim_(sim),
      addr_(addr),
      port_(port),
      transport_(sim.transport_for(addr, false)) {
  sim_.register_endpoint(addr, [this](const net::Datagram& d, net::TimeMs now) {
    on_datagram(d, now);
  });
}

void SipProxy::register_location(const std::string& sip_id,
                                 const net::Endpoint& ep) {
  locations_[sip_id] = ep;
}

void SipProxy::on_datagram(const net::Datagram& d, net::TimeMs now) {
  (void)now;
  if (d.kind != net::DatagramKind::Sip) return;
  sip::SipMessage m;
  try {
    m = sip::parse(d.payload);
  } catch (const sip::ParseError&) {
    return;
  }
  auto forward_to = [&](const net::Endpoint& ep) {
    net::Datagram out;
    out.claimed_src = {addr_, port_};
    out.dst = ep;
    out.kind = net::DatagramKind::Sip;
    out.payload = d.payload;  // byte-for-byte, SDP untouched
    transport_.send(out);
    ++forwarded_;
  };

  switch (m.kind) {
    case sip::Kind::Invite: {
      call_routes_[m.call_id] = d.claimed_src;
      // Provisional response straight back to the caller.
      const auto trying = sip::build_response(sip::Kind::Trying, m);
      const std::string text = sip::serialize(trying);
      net::Datagram t;
      t.claimed_src = {addr_, port_};
      t.dst = d.claimed_src;
      t.kind = net::DatagramKind::Sip;
      t.payload.assign(text.begin(), text.end());
      transport_.send(t);
      if (auto it = locations_.find(m.callee_id); it != locations_.end())
        forward_to(it->second);
      break;
    }
    case sip::Kind::Ack:
    case sip::Kind::Bye: {
      if (auto it = locations_.find(m.callee_id); it != locations_.end())
        forward_to(it->second);
      break;
    }
    case sip::Kind::Ok:
    case sip::Kind::Ringing:
    case sip::Kind::Reject:
    case sip::Kind::Trying: {
      if (auto it = call_routes_.find(m.call_id); it != call_routes_.end())
        forward_to(it->second);
      break;
    }
  }
}

void UpstreamQueue::send(const net::UpstreamMessage& m) {
  ++sent_;
  const net::UpstreamMessage copy = m;
  sim_.call_at(sim_.now_ms() + latency_ms_, [this, copy] {
    if (!receiver_) return;
    try {
      receiver_(copy, sim_.now_ms());
    } catch (const std::exception&) {
      ++receiver_errors_;
    }
  });
}

}  // namespace covercall::sim
