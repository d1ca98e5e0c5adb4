#include "mcdup/emulator.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <set>

namespace mcdup {

const char* to_string(Endpoint e) { return e == Endpoint::Client ? "client" : "server"; }

void EventLog::write_csv(std::ostream& out) const {
  out << "t_ns,event,link,dir,kind,flow_id,seq,payload_bytes,outcome\n";
  for (const LogEvent& e : events) {
    out << e.t_ns << ',' << (e.type == EventType::Transmit ? "tx" : "rx") << ',' << link_names.at(e.link) << ','
        << to_string(e.dir) << ',' << to_string(e.kind) << ',' << e.flow_id << ',' << e.seq << ','
        << e.payload_bytes << ',';
    if (e.type == EventType::Transmit) {
      if (e.deliver_at_ns) {
        out << "deliver@" << *e.deliver_at_ns;
      } else {
        out << "drop:" << to_string(*e.drop);
      }
    } else {
      out << (e.first_copy ? "first" : "duplicate");
    }
    out << '\n';
  }
}

bool EmulatedTransport::Later::operator()(const Event& a, const Event& b) const {
  if (a.t_ns != b.t_ns) return a.t_ns > b.t_ns;
  if (a.link != b.link) {
    const int c = self->names_[a.link].compare(self->names_[b.link]);
    if (c != 0) return c > 0;
  }
  if (a.seq != b.seq) return a.seq > b.seq;
  if (a.ordinal != b.ordinal) return a.ordinal > b.ordinal;
  return a.counter > b.counter;
}

EmulatedTransport::EmulatedTransport(std::vector<LinkProfile> links, std::uint64_t seed, EventLog* log,
                                     std::size_t dedup_window)
    : log_(log), queue_(Later{this}), client_{DedupState(dedup_window), {}}, server_{DedupState(dedup_window), {}} {
  if (links.empty()) throw ConfigError("emulation needs at least one link");
  std::set<std::string> seen;
  const RngStream root = RngStream::from_seed(seed);
  channels_.reserve(links.size());
  for (auto& p : links) {
    if (!seen.insert(p.name).second) throw ConfigError("duplicate link name '" + p.name + "'");
    names_.push_back(p.name);
    channels_.emplace_back(std::move(p), root);
  }
  client_.accounting = LinkShareAccounting(names_);
  server_.accounting = LinkShareAccounting(names_);
  if (log_) log_->link_names = names_;
}

void EmulatedTransport::push(Event e) {
  e.counter = counter_++;
  queue_.push(e);
}

void EmulatedTransport::transmit(std::size_t link, Direction dir, const TunnelFrame& frame, Ordinal on_delivery) {
  encode_frame_into(frame, wire_);
  const TransmitResult r = channels_.at(link).transmit(dir, frame.kind, frame.flow_id, frame.seq,
                                                       frame.payload.size(), now_ns_);
  LogEvent ev;
  if (log_) {
    ev.t_ns = now_ns_;
    ev.type = EventType::Transmit;
    ev.link = link;
    ev.dir = dir;
    ev.kind = frame.kind;
    ev.flow_id = frame.flow_id;
    ev.seq = frame.seq;
    ev.payload_bytes = frame.payload.size();
  }
  if (const auto* d = std::get_if<Delivered>(&r)) {
    Event e;
    e.t_ns = d->deliver_at_ns;
    e.link = link;
    e.seq = frame.seq;
    e.ordinal = on_delivery;
    e.header = decode_header(wire_);
    push(e);
    ev.deliver_at_ns = d->deliver_at_ns;
  } else {
    ev.drop = std::get<Dropped>(r).reason;
  }
  if (log_) log_->events.push_back(ev);
}

void EmulatedTransport::send(std::span<const std::size_t> links, const TunnelFrame& frame) {
  for (std::size_t link : links) {
    if (link >= channels_.size()) throw TransportError("no such link index " + std::to_string(link));
    transmit(link, Direction::Uplink, frame, Ordinal::ServerArrival);
  }
}

bool EmulatedTransport::arrive(Side& s, const Event& e, Direction dir) {
  bool first = false;
  if (e.header.flow_id == kMonitorFlowId) {
    first = dedup_accept(s.dedup, e.header.flow_id, e.header.seq) == DedupDecision::Accept;
  } else {
    first = on_copy_arrival(s.dedup, s.accounting, e.link, e.header.flow_id, e.header.seq, e.t_ns).accepted();
  }
  if (log_) {
    LogEvent ev;
    ev.t_ns = e.t_ns;
    ev.type = EventType::Receive;
    ev.link = e.link;
    ev.dir = dir;
    ev.kind = e.header.kind;
    ev.flow_id = e.header.flow_id;
    ev.seq = e.header.seq;
    ev.payload_bytes = e.header.payload_len;
    ev.first_copy = first;
    log_->events.push_back(ev);
  }
  return first;
}

void EmulatedTransport::start_downlink_load(const DownlinkLoadRequest& request) {
  if (request.links.empty()) throw ConfigError("downlink load needs at least one link");
  if (!(request.target_mbps > 0.0)) throw ConfigError("target_mbps must be > 0");
  for (std::size_t link : request.links) {
    if (link >= channels_.size()) throw TransportError("no such link index " + std::to_string(link));
  }
  if (request.frames == 0) return;
  DownlinkLoad load;
  load.request = request;
  load.interval_ns = static_cast<double>(request.payload_bytes) * 8.0 / request.target_mbps * 1e3;
  loads_.push_back(load);
  Event e;
  e.t_ns = std::max(request.start_ns, now_ns_);
  e.link = request.links.front();
  e.seq = 0;
  e.ordinal = Ordinal::ServerSend;
  e.load = loads_.size() - 1;
  push(e);
}

std::optional<Arrival> EmulatedTransport::receive_until(std::int64_t deadline_ns) {
  while (!queue_.empty() && queue_.top().t_ns <= deadline_ns) {
    const Event e = queue_.top();
    queue_.pop();
    now_ns_ = std::max(now_ns_, e.t_ns);

    switch (e.ordinal) {
      case Ordinal::ServerArrival: {
        const bool first = arrive(server_, e, Direction::Uplink);
        if (e.header.kind == FrameKind::ProbeRequest) {
          TunnelFrame reply;
          reply.kind = FrameKind::ProbeReply;
          reply.flow_id = e.header.flow_id;
          reply.seq = e.header.seq;
          reply.send_ts_ns = e.header.send_ts_ns;
          reply.payload.assign(e.header.payload_len, 0);
          transmit(e.link, Direction::Downlink, reply, Ordinal::ClientArrival);
          break;
        }
        if (e.header.kind == FrameKind::Load) {
          return Arrival{Endpoint::Server, e.header.kind,      e.header.flow_id, e.header.seq, e.header.send_ts_ns,
                         e.header.payload_len, e.link, e.t_ns, first};
        }
        break;
      }
      case Ordinal::ClientArrival: {
        const bool first = arrive(client_, e, Direction::Downlink);
        return Arrival{Endpoint::Client, e.header.kind, e.header.flow_id, e.header.seq, e.header.send_ts_ns,
                       e.header.payload_len, e.link, e.t_ns, first};
      }
      case Ordinal::ServerSend: {
        DownlinkLoad& load = loads_[e.load];
        TunnelFrame frame;
        frame.kind = FrameKind::Load;
        frame.flow_id = load.request.flow_id;
        frame.seq = load.sent;
        frame.send_ts_ns = static_cast<std::uint64_t>(now_ns_);
        frame.payload.assign(load.request.payload_bytes, 0);
        for (std::size_t link : load.request.links) transmit(link, Direction::Downlink, frame, Ordinal::ClientArrival);
        ++load.sent;
        if (load.sent < load.request.frames) {
          Event next = e;
          next.t_ns = load.request.start_ns +
                      static_cast<std::int64_t>(std::llround(static_cast<double>(load.sent) * load.interval_ns));
          next.seq = load.sent;
          push(next);
        }
        break;
      }
    }
  }
  now_ns_ = std::max(now_ns_, deadline_ns);
  return std::nullopt;
}

}  // namespace mcdup
