#include "covercall/client.hpp"

#include <algorithm>

namespace covercall::client {

ClientNode::ClientNode(ClientConfig config, net::Scheduler& scheduler,
                       net::DatagramTransport& transport,
                       net::UpstreamChannel& upstream)
    : config_(std::move(config)),
      scheduler_(scheduler),
      transport_(transport),
      upstream_(upstream),
      rng_(config_.rng_seed),
      keys_(crypto::derive_keys(config_.master_key)),
      dummy_mux_(codec_.block_capacity(), config_.lambda, 0,
                 config_.rng_seed ^ 0x66) {}

void ClientNode::start_session(net::TimeMs now) {
  if (state_ != SessionState::Idle) return;
  invite_ = sip::build_invite(config_.caller_sip_id, config_.callee_sip_id,
                              config_.addr, config_.profile, rng_,
                              config_.rtp_port);
  const std::string text = sip::serialize(invite_);
  net::Datagram d;
  d.claimed_src = {config_.addr, config_.sip_port};
  d.dst = config_.proxy;
  d.kind = net::DatagramKind::Sip;
  d.payload.assign(text.begin(), text.end());
  transport_.send(d);
  state_ = SessionState::Inviting;
  scheduler_.call_at(now + config_.ok_timeout_ms, [this] {
    if (state_ == SessionState::Inviting)
      abort_session("timeout waiting for OK");
  });
}

void ClientNode::abort_session(const std::string& reason) {
  state_ = SessionState::Aborted;
  abort_reason_ = reason;
  const net::TimeMs now = scheduler_.now_ms();
  while (!pending_.empty()) {
    PendingNav nav = std::move(pending_.back());
    pending_.pop_back();
    HttpResult res;
    res.status = 503;
    res.reason = "session aborted: " + reason;
    res.completed_at = now;
    resolve(nav.id, res);
    for (const auto& [wid, wurl] : nav.waiters) resolve(wid, res);
    page_stats_[nav.stats_index].done_ms = now;
    page_stats_[nav.stats_index].status = 503;
  }
}

void ClientNode::on_datagram(const net::Datagram& d, net::TimeMs now) {
  switch (d.kind) {
    case net::DatagramKind::Sip: {
      sip::SipMessage m;
      try {
        m = sip::parse(d.payload);
      } catch (const sip::ParseError&) {
        return;
      }
      on_sip(m, now);
      break;
    }
    case net::DatagramKind::Rtp:
      on_rtp(d, now);
      break;
    case net::DatagramKind::Rtcp:
      if (state_ == SessionState::Streaming ||
          state_ == SessionState::TearingDown) {
        if (!rtp::rtcp_check(d.payload, keys_, rtcp_guard_)) ++rtcp_invalid_;
      }
      break;
  }
}

void ClientNode::on_sip(const sip::SipMessage& m, net::TimeMs now) {
  switch (m.kind) {
    case sip::Kind::Ok: {
      if (state_ != SessionState::Inviting || m.call_id != invite_.call_id)
        return;
      sip::VerifiedCallee callee;
      try {
        callee = sip::verify_ok(m, keys_.integrity_key);
      } catch (const sip::IntegrityFailure&) {
        // Tampered endpoint: never ACK, never send media anywhere.
        abort_session("OK integrity check failed");
        return;
      } catch (const sip::MissingSdp&) {
        abort_session("OK without SDP");
        return;
      }
      ok_ = m;
      verified_callee_ = callee;
      try {
        codec_ = codec::lookup(m.sdp->codecs.front());
      } catch (const codec::UnknownCodec&) {
        abort_session("unknown negotiated codec");
        return;
      }
      demux_ = std::make_unique<fec::Demux>(codec_.block_capacity(),
                                            config_.lambda);
      dummy_mux_ =
          fec::Mux(codec_.block_capacity(), config_.lambda, 0, rng_());
      rtp_sender_.ssrc = static_cast<std::uint32_t>(rng_());
      rtp_sender_.timestamp_step = 8 * codec_.send_interval_ms;
      rtcp_sender_.ssrc = static_cast<std::uint32_t>(rng_());
      rtcp_sender_.timestamp_step = 8 * codec_.send_interval_ms;

      const auto ack = sip::build_response(sip::Kind::Ack, ok_);
      const std::string text = sip::serialize(ack);
      net::Datagram d;
      d.claimed_src = {config_.addr, config_.sip_port};
      d.dst = config_.proxy;
      d.kind = net::DatagramKind::Sip;
      d.payload.assign(text.begin(), text.end());
      transport_.send(d);
      ++acks_sent_;

      state_ = SessionState::Streaming;
      next_rtp_due_ = now;
      next_rtcp_due_ = now;
      schedule_wake(now);
      break;
    }
    case sip::Kind::Reject:
      if (state_ == SessionState::Inviting && m.call_id == invite_.call_id)
        abort_session("call rejected");
      break;
    case sip::Kind::Bye:
      if ((state_ == SessionState::Streaming ||
           state_ == SessionState::TearingDown) &&
          m.call_id == invite_.call_id) {
        state_ = SessionState::Terminated;
      }
      break;
    default:
      break;
  }
}

void ClientNode::on_rtp(const net::Datagram& d, net::TimeMs now) {
  if (state_ != SessionState::Streaming &&
      state_ != SessionState::TearingDown)
    return;
  ++rtp_received_;
  const auto packet = rtp::parse_packet(d.payload);
  if (!packet) {
    ++auth_failures_;
    return;
  }
  auto res = rtp::unframe(*packet, keys_, rtp_guard_, codec_.payload_size);
  switch (res.status) {
    case rtp::UnframeStatus::AuthFailure:
      ++auth_failures_;
      return;
    case rtp::UnframeStatus::ReplayDetected:
      ++replays_dropped_;
      return;
    case rtp::UnframeStatus::Ok:
      break;
  }
  const auto deliveries = demux_->ingest(*res.block);
  process_deliveries(deliveries, now);
  check_gaps(now);
}

void ClientNode::process_deliveries(
    const std::vector<fec::Delivery>& deliveries, net::TimeMs now) {
  std::vector<std::uint8_t> finished_tasks;
  for (const auto& delivery : deliveries) {
    auto& parser = parsers_[delivery.task];
    const auto records = parser.feed(delivery.bytes);
    for (const auto& rec : records) {
      const auto url = web::request_url(rec.request);
      if (url) cache_[web::normalize_url(*url)] = rec.response;
      if (!first_record_seen_[delivery.task]) {
        first_record_seen_[delivery.task] = true;
        for (const auto& nav : pending_) {
          if (nav.task == delivery.task)
            page_stats_[nav.stats_index].html_ms = now;
        }
      }
    }
    if (parser.end_seen()) {
      demux_->mark_complete(delivery.task);
      finished_tasks.push_back(delivery.task);
    }
  }
  for (std::uint8_t task : finished_tasks) {
    for (std::size_t i = 0; i < pending_.size(); ++i) {
      if (pending_[i].task == task) {
        PendingNav nav = std::move(pending_[i]);
        pending_.erase(pending_.begin() + i);
        finish_nav(nav, 504, "page finished without this URL", now);
        break;
      }
    }
  }
}

void ClientNode::finish_nav(PendingNav& nav, int status, const char* reason,
                            net::TimeMs now) {
  auto serve = [&](const std::string& url) {
    HttpResult res;
    res.completed_at = now;
    auto it = cache_.find(url);
    if (it != cache_.end()) {
      res.response = it->second;
      res.status = web::response_status(it->second).value_or(200);
      res.reason = "served";
    } else {
      res.status = status;
      res.reason = reason;
    }
    return res;
  };
  const HttpResult own = serve(nav.url);
  resolve(nav.id, own);
  for (const auto& [wid, wurl] : nav.waiters) resolve(wid, serve(wurl));
  auto& stats = page_stats_[nav.stats_index];
  stats.done_ms = now;
  stats.status = own.status;
  active_tasks_.erase(nav.task);
}

void ClientNode::check_gaps(net::TimeMs now) {
  for (std::size_t i = 0; i < pending_.size();) {
    const auto* stream = demux_ ? demux_->stream(pending_[i].task) : nullptr;
    if (stream && stream->gap) {
      PendingNav nav = std::move(pending_[i]);
      pending_.erase(pending_.begin() + i);
      page_stats_[nav.stats_index].gap = true;
      HttpResult res;
      res.status = 502;
      res.reason = "unrecoverable loss in the downstream stream";
      res.completed_at = now;
      resolve(nav.id, res);
      for (const auto& [wid, wurl] : nav.waiters) resolve(wid, res);
      auto& stats = page_stats_[nav.stats_index];
      stats.done_ms = now;
      stats.status = 502;
      active_tasks_.erase(nav.task);
    } else {
      ++i;
    }
  }
}

void ClientNode::resolve(RequestId id, HttpResult result) {
  results_[id] = std::move(result);
}

std::uint8_t ClientNode::alloc_task() {
  for (int i = 0; i < 255; ++i) {
    const std::uint8_t candidate = next_task_;
    next_task_ = next_task_ == 255 ? 1 : next_task_ + 1;
    if (!active_tasks_.count(candidate)) {
      active_tasks_.insert(candidate);
      return candidate;
    }
  }
  throw std::runtime_error("all 255 task numbers are active");
}

bool ClientNode::is_object_request(const std::string& url) const {
  const std::string ext = web::path_extension(url);
  if (ext.empty()) return false;
  return std::find(config_.object_extensions.begin(),
                   config_.object_extensions.end(),
                   ext) != config_.object_extensions.end();
}

RequestId ClientNode::http_request(std::span<const std::uint8_t> request,
                                   net::TimeMs now) {
  const RequestId id = next_request_id_++;
  const auto url = web::request_url(request);
  if (!url) {
    HttpResult res;
    res.status = 400;
    res.reason = "unparseable request";
    res.completed_at = now;
    resolve(id, res);
    return id;
  }
  const std::string norm = web::normalize_url(*url);

  if (auto it = cache_.find(norm); it != cache_.end()) {
    HttpResult res;
    res.status = web::response_status(it->second).value_or(200);
    res.reason = "cache";
    res.response = it->second;
    res.from_cache = true;
    res.completed_at = now;
    resolve(id, res);
    return id;
  }

  if (is_object_request(norm)) {
    // Object fetches never go upstream. Either an in-flight page delivers
    // them or they fail against the finished page.
    if (!pending_.empty()) {
      pending_.back().waiters.emplace_back(id, norm);
    } else {
      HttpResult res;
      res.status = 504;
      res.reason = "object not delivered with any page";
      res.completed_at = now;
      resolve(id, res);
    }
    return id;
  }

  if (state_ != SessionState::Streaming || !demux_) {
    HttpResult res;
    res.status = 503;
    res.reason = "no streaming session";
    res.completed_at = now;
    resolve(id, res);
    return id;
  }

  const std::uint8_t task = alloc_task();
  demux_->expect_task(task);
  upstream_.send({norm, config_.addr, task});
  ++upstream_sent_;

  PendingNav nav;
  nav.id = id;
  nav.task = task;
  nav.url = norm;
  nav.submitted = now;
  nav.stats_index = page_stats_.size();
  page_stats_.push_back(PageStats{norm, task, now, 0, 0, 0, false});
  pending_.push_back(std::move(nav));

  scheduler_.call_at(now + config_.page_deadline_ms, [this, id] {
    for (std::size_t i = 0; i < pending_.size(); ++i) {
      if (pending_[i].id == id) {
        PendingNav nav2 = std::move(pending_[i]);
        pending_.erase(pending_.begin() + i);
        finish_nav(nav2, 504, "page deadline passed", scheduler_.now_ms());
        break;
      }
    }
  });
  return id;
}

RequestId ClientNode::http_get(const std::string& url, net::TimeMs now) {
  return http_request(web::build_request(url), now);
}

bool ClientNode::done(RequestId id) const { return results_.count(id) > 0; }

const HttpResult& ClientNode::result(RequestId id) const {
  return results_.at(id);
}

void ClientNode::teardown(net::TimeMs now) {
  switch (state_) {
    case SessionState::Streaming: {
      const std::uint8_t task = alloc_task();
      upstream_.send({net::kTerminateUrl, config_.addr, task});
      ++upstream_sent_;
      active_tasks_.erase(task);
      state_ = SessionState::TearingDown;
      scheduler_.call_at(now + config_.teardown_deadline_ms, [this] {
        if (state_ == SessionState::TearingDown)
          state_ = SessionState::Terminated;
      });
      break;
    }
    case SessionState::Inviting:
      abort_session("teardown before session established");
      break;
    default:
      break;  // idempotent
  }
}

void ClientNode::schedule_wake(net::TimeMs t) {
  if (wake_pending_ && wake_at_ <= t) return;
  wake_pending_ = true;
  wake_at_ = t;
  scheduler_.call_at(t, [this, t] {
    if (wake_at_ == t) wake_pending_ = false;
    tick(scheduler_.now_ms());
  });
}

std::vector<net::Datagram> ClientNode::tick(net::TimeMs now) {
  std::vector<net::Datagram> emitted;
  const bool active = (state_ == SessionState::Streaming ||
                       state_ == SessionState::TearingDown) &&
                      verified_callee_.has_value();
  if (!active) return emitted;

  // Constant-rate dummy media toward the verified callee, nowhere else.
  while (next_rtp_due_ <= now) {
    const fec::Block filler = dummy_mux_.next_block();
    const auto packet =
        rtp::frame(filler, keys_, rtp_sender_, codec_.payload_size);
    rtp_sender_.advance();
    net::Datagram d;
    d.claimed_src = {config_.addr, config_.rtp_port};
    d.dst = {verified_callee_->addr, verified_callee_->rtp_port};
    d.kind = net::DatagramKind::Rtp;
    d.payload = rtp::serialize_packet(packet);
    transport_.send(d);
    ++dummy_rtp_sent_;
    ++media_sent_to_[d.dst.addr];
    emitted.push_back(std::move(d));
    next_rtp_due_ += codec_.send_interval_ms;
  }
  while (next_rtcp_due_ <= now) {
    net::Datagram d;
    d.claimed_src = {config_.addr,
                     static_cast<std::uint16_t>(config_.rtp_port + 1)};
    d.dst = {verified_callee_->addr,
             static_cast<std::uint16_t>(verified_callee_->rtp_port + 1)};
    d.kind = net::DatagramKind::Rtcp;
    d.payload =
        rtp::rtcp_packet(keys_, rtcp_sender_, codec_.payload_size, rng_);
    transport_.send(d);
    ++dummy_rtcp_sent_;
    ++media_sent_to_[d.dst.addr];
    emitted.push_back(std::move(d));
    next_rtcp_due_ += config_.rtcp_interval_ms;
  }
  schedule_wake(std::min(next_rtp_due_, next_rtcp_due_));
  return emitted;
}

std::uint64_t ClientNode::recovered_blocks() const {
  return demux_ ? demux_->recovered_blocks() : 0;
}

}  // namespace covercall::client
