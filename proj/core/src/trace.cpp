#include "cbcast/trace.hpp"

#include <charconv>
#include <sstream>

#include "cbcast/encoding.hpp"
#include "cbcast/rng.hpp"

namespace cbcast {

namespace {

const char* kind_name(TraceEvent::Kind k) {
  switch (k) {
    case TraceEvent::Kind::Notify: return "notify";
    case TraceEvent::Kind::PacketIn: return "packet-in";
    case TraceEvent::Kind::RequestIn: return "request-in";
    case TraceEvent::Kind::Queue: return "queue";
    case TraceEvent::Kind::Deliver: return "deliver";
    case TraceEvent::Kind::Install: return "install";
    case TraceEvent::Kind::Halt: return "halt";
    case TraceEvent::Kind::Discard: return "discard";
  }
  return "?";
}

std::optional<TraceEvent::Kind> kind_from(const std::string& name) {
  using K = TraceEvent::Kind;
  if (name == "notify") return K::Notify;
  if (name == "packet-in") return K::PacketIn;
  if (name == "request-in") return K::RequestIn;
  if (name == "queue") return K::Queue;
  if (name == "deliver") return K::Deliver;
  if (name == "install") return K::Install;
  if (name == "halt") return K::Halt;
  if (name == "discard") return K::Discard;
  return std::nullopt;
}

std::uint64_t to_u64(std::string_view tok, const char* what) {
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size())
    throw TraceError(std::string("bad ") + what + ": " + std::string(tok));
  return v;
}

std::vector<std::string> split_ws(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream in(line);
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

// field of the form key=value
std::string_view field(const std::string& tok, const char* key) {
  std::string_view sv(tok);
  std::string prefix = std::string(key) + "=";
  if (sv.substr(0, prefix.size()) != prefix)
    throw TraceError("expected field " + prefix + "..., got " + tok);
  return sv.substr(prefix.size());
}

std::string render_subs(const std::vector<SubTransaction>& subs) {
  std::string out;
  bool first = true;
  for (const auto& s : subs) {
    if (!first) out += ";";
    first = false;
    out += s.is_message ? "m" : "a";
    out += codec::encode(s.id);
    if (s.takeup) out += "+t";
    if (s.noop) out += "+n";
  }
  return out;
}

std::vector<SubTransaction> parse_subs(std::string_view text) {
  std::vector<SubTransaction> out;
  size_t pos = 0;
  while (pos < text.size()) {
    size_t end = text.find(';', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view item = text.substr(pos, end - pos);
    SubTransaction sub;
    if (item.empty()) throw TraceError("empty sub-transaction");
    sub.is_message = item[0] == 'm';
    if (!sub.is_message && item[0] != 'a')
      throw TraceError("bad sub-transaction kind");
    item.remove_prefix(1);
    while (item.size() >= 2 && item.substr(item.size() - 2, 1) == "+") {
      char flag = item.back();
      if (flag == 't') sub.takeup = true;
      else if (flag == 'n') sub.noop = true;
      else throw TraceError("bad sub-transaction flag");
      item.remove_suffix(2);
    }
    sub.id = codec::decode_message_id(item);
    out.push_back(std::move(sub));
    pos = end + 1;
  }
  return out;
}

}  // namespace

std::string render_trace_header(std::string_view scenario_hash,
                                std::uint64_t seed) {
  return "trace scenario=" + std::string(scenario_hash) +
         " seed=" + std::to_string(seed) + " prng=" + Xoshiro256::kName + "\n";
}

std::string render_trace_event(const TraceEvent& ev) {
  std::string out = std::to_string(ev.seq) + " " + std::to_string(ev.tick) +
                    " " + ev.process.id + " " + kind_name(ev.kind);
  switch (ev.kind) {
    case TraceEvent::Kind::Notify:
      out += " view=" + std::to_string(ev.view) +
             " n=" + codec::encode(ev.notification);
      break;
    case TraceEvent::Kind::PacketIn:
      out += " from=" + ev.peer.id + " pkt=" + codec::encode(ev.packet);
      if (ev.takeup) out += " tu=1";
      if (ev.noop_ack) out += " noop=1";
      if (!ev.subs.empty()) out += " subs=" + render_subs(ev.subs);
      break;
    case TraceEvent::Kind::RequestIn:
      out += " data=" + codec::pct_encode(ev.payload);
      break;
    case TraceEvent::Kind::Queue: {
      out += " to=";
      bool first = true;
      for (const auto& t : ev.targets) {
        if (!first) out += ",";
        first = false;
        out += t.id;
      }
      out += " pkt=" + codec::encode(ev.packet);
      break;
    }
    case TraceEvent::Kind::Deliver:
      out += " id=" + codec::encode(ev.mid) +
             " data=" + codec::pct_encode(ev.payload);
      break;
    case TraceEvent::Kind::Install:
      out += " view=" + std::to_string(ev.view) +
             " gap=" + std::to_string(ev.gap);
      break;
    case TraceEvent::Kind::Halt:
      break;
    case TraceEvent::Kind::Discard:
      out += " from=" + ev.peer.id + " pkt=" + codec::encode(ev.packet);
      break;
  }
  out += "\n";
  return out;
}

std::string render_trace_end(bool quiescent, std::uint64_t ticks,
                             std::uint64_t events) {
  return "end quiescent=" + std::to_string(quiescent ? 1 : 0) +
         " ticks=" + std::to_string(ticks) +
         " events=" + std::to_string(events) + "\n";
}

ParsedTrace parse_trace(std::string_view text) {
  ParsedTrace trace;
  std::istringstream in{std::string(text)};
  std::string line;
  bool saw_header = false;
  bool saw_end = false;
  std::uint64_t prev_seq = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto toks = split_ws(line);
    if (toks.empty()) continue;
    try {
      if (!saw_header) {
        if (toks[0] != "trace" || toks.size() != 4)
          throw TraceError("missing trace header");
        trace.scenario_hash = std::string(field(toks[1], "scenario"));
        trace.seed = to_u64(field(toks[2], "seed"), "seed");
        trace.prng = std::string(field(toks[3], "prng"));
        saw_header = true;
        continue;
      }
      if (toks[0] == "end") {
        if (toks.size() != 4) throw TraceError("malformed end record");
        trace.quiescent = to_u64(field(toks[1], "quiescent"), "flag") != 0;
        trace.ticks = to_u64(field(toks[2], "ticks"), "ticks");
        saw_end = true;
        continue;
      }
      if (saw_end) throw TraceError("events after end record");
      if (toks.size() < 4) throw TraceError("short event line");
      TraceEvent ev;
      ev.seq = to_u64(toks[0], "seq");
      ev.tick = to_u64(toks[1], "tick");
      ev.process = ProcessId{toks[2]};
      auto kind = kind_from(toks[3]);
      if (!kind) throw TraceError("unknown event kind " + toks[3]);
      ev.kind = *kind;
      if (!trace.events.empty() && ev.seq <= prev_seq)
        throw TraceError("seq not strictly increasing at " +
                         std::to_string(ev.seq));
      prev_seq = ev.seq;
      size_t i = 4;
      switch (ev.kind) {
        case TraceEvent::Kind::Notify:
          ev.view = to_u64(field(toks.at(i++), "view"), "view");
          ev.notification =
              codec::decode_notification(field(toks.at(i++), "n"));
          break;
        case TraceEvent::Kind::PacketIn:
          ev.peer = ProcessId{std::string(field(toks.at(i++), "from"))};
          ev.packet = codec::decode_packet(field(toks.at(i++), "pkt"));
          while (i < toks.size()) {
            std::string_view tok(toks[i]);
            if (tok.substr(0, 3) == "tu=") {
              ev.takeup = to_u64(tok.substr(3), "tu") != 0;
            } else if (tok.substr(0, 5) == "noop=") {
              ev.noop_ack = to_u64(tok.substr(5), "noop") != 0;
            } else if (tok.substr(0, 5) == "subs=") {
              ev.subs = parse_subs(tok.substr(5));
            } else {
              throw TraceError("unknown packet-in field " + toks[i]);
            }
            ++i;
          }
          break;
        case TraceEvent::Kind::RequestIn:
          ev.payload = codec::pct_decode(field(toks.at(i++), "data"));
          break;
        case TraceEvent::Kind::Queue: {
          std::string_view to = field(toks.at(i++), "to");
          size_t pos = 0;
          while (pos <= to.size() && !to.empty()) {
            size_t end = to.find(',', pos);
            if (end == std::string_view::npos) end = to.size();
            ev.targets.push_back(
                ProcessId{std::string(to.substr(pos, end - pos))});
            if (end == to.size()) break;
            pos = end + 1;
          }
          ev.packet = codec::decode_packet(field(toks.at(i++), "pkt"));
          break;
        }
        case TraceEvent::Kind::Deliver:
          ev.mid = codec::decode_message_id(field(toks.at(i++), "id"));
          ev.payload = codec::pct_decode(field(toks.at(i++), "data"));
          break;
        case TraceEvent::Kind::Install:
          ev.view = to_u64(field(toks.at(i++), "view"), "view");
          ev.gap = to_u64(field(toks.at(i++), "gap"), "gap");
          break;
        case TraceEvent::Kind::Halt:
          break;
        case TraceEvent::Kind::Discard:
          ev.peer = ProcessId{std::string(field(toks.at(i++), "from"))};
          ev.packet = codec::decode_packet(field(toks.at(i++), "pkt"));
          break;
      }
      trace.events.push_back(std::move(ev));
    } catch (const codec::CodecError& e) {
      throw TraceError(std::string("codec: ") + e.what() + " in line: " +
                       line);
    } catch (const std::out_of_range&) {
      throw TraceError("truncated event line: " + line);
    }
  }
  if (!saw_header) throw TraceError("empty trace");
  if (!saw_end) throw TraceError("missing end record");
  return trace;
}

std::string render_trace(const ParsedTrace& trace) {
  std::string out = "trace scenario=" + trace.scenario_hash +
                    " seed=" + std::to_string(trace.seed) +
                    " prng=" + trace.prng + "\n";
  for (const auto& ev : trace.events) out += render_trace_event(ev);
  out += render_trace_end(trace.quiescent, trace.ticks, trace.events.size());
  return out;
}

}  // namespace cbcast
