#include "covercall/spoofer.hpp"

#include <algorithm>
#include <sstream>

namespace covercall::spoofer {

std::string serialize_registration(const RegistrationRecord& rec) {
  std::ostringstream out;
  out << rec.caller_sip_id << '|' << crypto::to_hex(rec.master_key) << '|'
      << rec.callee_sip_id << '|' << rec.callee_sip_password << '|'
      << rec.upstream_id << '|' << rec.upstream_password;
  return out.str();
}

RegistrationRecord parse_registration(const std::string& text) {
  std::vector<std::string> fields;
  std::string item;
  std::istringstream in(text);
  while (std::getline(in, item, '|')) fields.push_back(item);
  if (fields.size() != 6)
    throw MalformedRecord("expected 6 fields, got " +
                          std::to_string(fields.size()));
  for (const auto& f : fields)
    if (f.empty()) throw MalformedRecord("empty field");
  auto master = crypto::from_hex(fields[1]);
  if (!master || master->empty())
    throw MalformedRecord("master key is not hex");
  RegistrationRecord rec;
  rec.caller_sip_id = fields[0];
  rec.master_key = std::move(*master);
  rec.callee_sip_id = fields[2];
  rec.callee_sip_password = fields[3];
  rec.upstream_id = fields[4];
  rec.upstream_password = fields[5];
  return rec;
}

SpooferNode::SpooferNode(SpooferConfig config, net::Scheduler& scheduler,
                         net::DatagramTransport& transport,
                         hostsel::HostRegistry& registry,
                         hostsel::GeoProvider& geo,
                         hostsel::PortScanner& scanner,
                         web::PageFetcher& fetcher, crypto::BoxKeypair keypair,
                         const aspath::AsPathProvider* paths,
                         const aspath::AsTopology* topo)
    : config_(std::move(config)),
      scheduler_(scheduler),
      transport_(transport),
      registry_(registry),
      geo_(geo),
      scanner_(scanner),
      fetcher_(fetcher),
      keypair_(keypair),
      paths_(paths),
      topo_(topo),
      rng_(config_.rng_seed) {
  for (const auto& name : config_.ua_profiles) {
    if (name.find('/') != std::string::npos ||
        name.find(".profile") != std::string::npos) {
      profiles_.push_back(sip::load_profile(name));
    } else {
      profiles_.push_back(sip::builtin_profile(name));
    }
  }
  if (profiles_.empty()) profiles_.push_back(sip::builtin_profile("ekiga"));
}

const RegistrationRecord& SpooferNode::register_user(
    std::span<const std::uint8_t> ciphertext) {
  auto plaintext = crypto::seal_open(keypair_, ciphertext);
  if (!plaintext) throw DecryptFailure();
  RegistrationRecord rec =
      parse_registration(std::string(plaintext->begin(), plaintext->end()));
  callee_index_[rec.callee_sip_id] = rec.caller_sip_id;
  auto [it, unused] = users_.insert_or_assign(rec.caller_sip_id,
                                              std::move(rec));
  (void)unused;
  return it->second;
}

const sip::UserAgentProfile& SpooferNode::profile_for(
    const std::string& callee) const {
  // One fixed profile per callee SIP ID, stable across sessions.
  return profiles_[std::hash<std::string>{}(callee) % profiles_.size()];
}

void SpooferNode::send_sip(const sip::SipMessage& m) {
  const std::string text = sip::serialize(m);
  net::Datagram d;
  d.claimed_src = {config_.addr, config_.sip_port};
  d.dst = config_.proxy;
  d.kind = net::DatagramKind::Sip;
  d.payload.assign(text.begin(), text.end());
  transport_.send(d);
}

void SpooferNode::on_datagram(const net::Datagram& d, net::TimeMs now) {
  if (d.kind != net::DatagramKind::Sip) return;  // the relay receives no media
  sip::SipMessage m;
  try {
    m = sip::parse(d.payload);
  } catch (const sip::ParseError&) {
    return;
  }
  switch (m.kind) {
    case sip::Kind::Invite:
      handle_invite(m, now);
      break;
    case sip::Kind::Ack:
      handle_ack(m, now);
      break;
    default:
      break;
  }
}

void SpooferNode::handle_invite(const sip::SipMessage& invite,
                                net::TimeMs now) {
  auto callee_it = callee_index_.find(invite.callee_id);
  if (callee_it == callee_index_.end()) {
    // Not one of ours. Stay quiet: an error reply would hand the censor a
    // probe for relay-controlled SIP IDs.
    ++unknown_callee_invites_;
    return;
  }
  if (!invite.sdp) return;
  const RegistrationRecord& reg = users_.at(callee_it->second);
  const auto keys = crypto::derive_keys(reg.master_key);
  const std::string client_addr = invite.sdp->media_address;

  // Entry-point consistency: a fresh dummy must enter the censored network
  // where the relay's own (spoofed) traffic will.
  std::function<bool(const hostsel::DummyHostRecord&)> eligible;
  if (paths_ && topo_) {
    const auto spoofer_as = topo_->as_of(config_.addr);
    const auto client_as = topo_->as_of(client_addr);
    if (spoofer_as && client_as) {
      try {
        const auto reference = paths_->path(*spoofer_as, *client_as);
        const auto ref_entry =
            aspath::entry_point(reference, config_.censor_ases);
        if (ref_entry) {
          eligible = [this, client_as, ref_entry](
                         const hostsel::DummyHostRecord& rec) {
            const auto cand_as = topo_->as_of(rec.addr);
            if (!cand_as) return false;
            try {
              const auto p = paths_->path(*cand_as, *client_as);
              return aspath::entry_point(p, config_.censor_ases) == ref_entry;
            } catch (const aspath::PathUnknown&) {
              return false;
            }
          };
        }
      } catch (const aspath::PathUnknown&) {
        // No reference path; fall through with no filter.
      }
    }
  }

  hostsel::DummyHostRecord dummy;
  try {
    dummy = registry_.assign(invite.callee_id, geo_,
                             config_.distance_threshold_km, rng_, eligible);
  } catch (const hostsel::NoCandidate&) {
    send_sip(sip::build_response(sip::Kind::Reject, invite));
    ++rejects_sent_;
    return;
  }

  const auto& profile = profile_for(invite.callee_id);
  sip::SipMessage ok;
  try {
    ok = sip::build_manipulated_ok(invite, profile, dummy.addr,
                                   dummy.rtp_port, keys.integrity_key, rng_);
  } catch (const sip::NoCommonCodec&) {
    registry_.release(dummy.addr);
    send_sip(sip::build_response(sip::Kind::Reject, invite));
    ++rejects_sent_;
    return;
  }

  // Replace any stale session for this client.
  if (auto old = sessions_.find(client_addr); old != sessions_.end()) {
    terminate_session(*old->second, now, false);
    sessions_.erase(old);
  }

  const auto negotiated = codec::lookup(ok.sdp->codecs.front());
  auto session = std::make_unique<Session>(negotiated.block_capacity(),
                                           config_.lambda, rng_());
  session->callee_sip_id = invite.callee_id;
  session->client_addr = client_addr;
  session->client_media = {client_addr, invite.sdp->rtp_port};
  session->dummy = dummy;
  session->keys = keys;
  session->codec = negotiated;
  session->dialog_ok = ok;
  session->rtp_sender.ssrc = static_cast<std::uint32_t>(rng_());
  session->rtp_sender.timestamp_step = 8 * negotiated.send_interval_ms;
  session->rtcp_sender.ssrc = static_cast<std::uint32_t>(rng_());
  session->rtcp_sender.timestamp_step = 8 * negotiated.send_interval_ms;
  call_index_[ok.call_id] = client_addr;
  sessions_[client_addr] = std::move(session);

  send_sip(ok);
}

void SpooferNode::handle_ack(const sip::SipMessage& ack, net::TimeMs now) {
  auto call_it = call_index_.find(ack.call_id);
  if (call_it == call_index_.end()) return;
  auto sess_it = sessions_.find(call_it->second);
  if (sess_it == sessions_.end()) return;
  Session& s = *sess_it->second;
  if (s.state != Session::State::Initializing) return;
  s.state = Session::State::Streaming;
  s.next_rtp_due = now;
  s.next_rtcp_due = now;
  s.next_monitor_due = now + config_.monitor_interval_ms;
  schedule_wake(now);
}

void SpooferNode::handle_upstream(const net::UpstreamMessage& m,
                                  net::TimeMs now) {
  auto it = sessions_.find(m.client_addr);
  if (it == sessions_.end() || it->second->state != Session::State::Streaming)
    throw NoSession(m.client_addr);
  Session& s = *it->second;

  if (m.url == net::kTerminateUrl) {
    terminate_session(s, now, true);
    return;
  }
  if (m.task == fec::kReservedTask) throw DuplicateTask(m.task);
  if (s.active_tasks.count(m.task) || s.mux.has_pending(m.task))
    throw DuplicateTask(m.task);
  s.active_tasks.insert(m.task);

  const std::string client = m.client_addr;
  const std::uint8_t task = m.task;
  const std::string url = m.url;
  scheduler_.call_at(now + config_.fetch_latency_ms,
                     [this, client, task, url] {
                       enqueue_page(client, task, url);
                     });
}

void SpooferNode::enqueue_page(const std::string& client_addr,
                               std::uint8_t task, const std::string& url) {
  auto it = sessions_.find(client_addr);
  if (it == sessions_.end() || it->second->state != Session::State::Streaming)
    return;
  Session& s = *it->second;
  const auto records = web::prefetch(url, fetcher_);
  s.mux.enqueue(task, web::encode_records(records));
  s.active_tasks.erase(task);  // has_pending covers it from here on
}

void SpooferNode::terminate_session(Session& s, net::TimeMs now,
                                    bool send_bye) {
  if (s.state == Session::State::Terminated) return;
  if (send_bye) {
    const auto bye = sip::build_response(sip::Kind::Bye, s.dialog_ok);
    const std::string text = sip::serialize(bye);
    net::Datagram d;
    d.claimed_src = {s.dummy.addr, hostsel::kSipPort};
    d.dst = {s.client_addr, hostsel::kSipPort};
    d.kind = net::DatagramKind::Sip;
    d.payload.assign(text.begin(), text.end());
    rtp::spoofed_send(transport_, d);
    ++byes_sent_;
  }
  s.state = Session::State::Terminated;
  (void)now;
  try {
    registry_.release(s.dummy.addr);
  } catch (const hostsel::NotAssigned&) {
  }
  call_index_.erase(s.dialog_ok.call_id);
}

const SpooferNode::Session* SpooferNode::session_for(
    const std::string& client_addr) const {
  auto it = sessions_.find(client_addr);
  return it == sessions_.end() ? nullptr : it->second.get();
}

void SpooferNode::schedule_wake(net::TimeMs t) {
  if (wake_pending_ && wake_at_ <= t) return;
  wake_pending_ = true;
  wake_at_ = t;
  scheduler_.call_at(t, [this, t] {
    if (wake_at_ == t) wake_pending_ = false;
    tick(scheduler_.now_ms());
  });
}

std::vector<net::Datagram> SpooferNode::tick(net::TimeMs now) {
  std::vector<net::Datagram> emitted;
  bool any_streaming = false;
  net::TimeMs earliest = ~0ull;

  for (auto& [client, sess] : sessions_) {
    Session& s = *sess;
    if (s.state != Session::State::Streaming) continue;

    while (s.next_monitor_due <= now &&
           s.state == Session::State::Streaming) {
      s.next_monitor_due += config_.monitor_interval_ms;
      const auto result = registry_.monitor(s.dummy.addr, scanner_, now);
      if (result == hostsel::MonitorResult::Lost) {
        terminate_session(s, now, true);
      }
    }
    if (s.state != Session::State::Streaming) continue;

    while (s.next_rtp_due <= now) {
      const fec::Block block = s.mux.next_block();
      const auto packet =
          rtp::frame(block, s.keys, s.rtp_sender, s.codec.payload_size);
      s.rtp_sender.advance();
      net::Datagram d;
      d.claimed_src = {s.dummy.addr, s.dummy.rtp_port};
      d.dst = s.client_media;
      d.kind = net::DatagramKind::Rtp;
      d.payload = rtp::serialize_packet(packet);
      rtp::spoofed_send(transport_, d);
      emitted.push_back(std::move(d));
      ++s.rtp_emitted;
      ++rtp_sent_;
      s.next_rtp_due += s.codec.send_interval_ms;
    }

    while (s.next_rtcp_due <= now) {
      net::Datagram d;
      d.claimed_src = {s.dummy.addr,
                       static_cast<std::uint16_t>(s.dummy.rtp_port + 1)};
      d.dst = {s.client_media.addr,
               static_cast<std::uint16_t>(s.client_media.port + 1)};
      d.kind = net::DatagramKind::Rtcp;
      d.payload =
          rtp::rtcp_packet(s.keys, s.rtcp_sender, s.codec.payload_size, rng_);
      rtp::spoofed_send(transport_, d);
      emitted.push_back(std::move(d));
      ++s.rtcp_emitted;
      ++rtcp_sent_;
      s.next_rtcp_due += config_.rtcp_interval_ms;
    }

    any_streaming = true;
    earliest = std::min({earliest, s.next_rtp_due, s.next_rtcp_due,
                         s.next_monitor_due});
  }

  if (any_streaming) schedule_wake(earliest);
  return emitted;
}

}  // namespace covercall::spoofer
