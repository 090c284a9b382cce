#include "cbcast/encoding.hpp"

#include <charconv>

namespace cbcast::codec {

namespace {

bool pct_safe(char c) {
  return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') ||
         (c >= '0' && c <= '9') || c == '.' || c == '_' || c == '~' || c == '-';
}

constexpr char kHex[] = "0123456789ABCDEF";

int hex_val(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  return -1;
}

// Minimal recursive-descent cursor over the canonical forms.
struct Cursor {
  std::string_view text;
  size_t pos = 0;

  bool done() const { return pos >= text.size(); }
  char peek() const {
    if (done()) throw CodecError("unexpected end of input");
    return text[pos];
  }
  char take() {
    char c = peek();
    ++pos;
    return c;
  }
  void expect(char c) {
    if (done() || text[pos] != c)
      throw CodecError(std::string("expected '") + c + "' in \"" +
                       std::string(text) + "\" at " + std::to_string(pos));
    ++pos;
  }
  bool try_take(char c) {
    if (!done() && text[pos] == c) {
      ++pos;
      return true;
    }
    return false;
  }

  std::uint64_t u64() {
    std::uint64_t value = 0;
    auto [ptr, ec] =
        std::from_chars(text.data() + pos, text.data() + text.size(), value);
    if (ec != std::errc() || ptr == text.data() + pos)
      throw CodecError("expected integer in \"" + std::string(text) + "\"");
    pos = static_cast<size_t>(ptr - text.data());
    return value;
  }

  // Token of pct-safe characters (also used for process ids).
  std::string token() {
    size_t start = pos;
    while (!done() && (pct_safe(text[pos]) || text[pos] == '%')) ++pos;
    return std::string(text.substr(start, pos - start));
  }
};

ProcessId parse_pid(Cursor& c) {
  std::string tok = c.token();
  if (tok.empty()) throw CodecError("expected process id");
  return ProcessId{tok};
}

CounterPair parse_counter(Cursor& c) {
  CounterPair cp;
  c.expect('b');
  cp.b = c.u64();
  c.expect('f');
  cp.f = c.u64();
  return cp;
}

VectorTime parse_vt(Cursor& c) {
  VectorTime vt;
  c.expect('{');
  if (!c.try_take('}')) {
    while (true) {
      ProcessId pid = parse_pid(c);
      c.expect(':');
      vt[pid] = c.u64();
      if (c.try_take('}')) break;
      c.expect(',');
    }
  }
  return vt;
}

std::map<ProcessId, CounterPair> parse_cpmap(Cursor& c) {
  std::map<ProcessId, CounterPair> m;
  c.expect('{');
  if (!c.try_take('}')) {
    while (true) {
      ProcessId pid = parse_pid(c);
      c.expect(':');
      m[pid] = parse_counter(c);
      if (c.try_take('}')) break;
      c.expect(',');
    }
  }
  return m;
}

MessageId parse_mid(Cursor& c) {
  MessageId id;
  c.expect('(');
  id.mview = c.u64();
  c.expect(',');
  id.mvt = parse_vt(c);
  c.expect(',');
  id.orig = parse_pid(c);
  c.expect(')');
  return id;
}

StampedMessage parse_msg(Cursor& c) {
  StampedMessage m;
  c.expect('(');
  m.orig = parse_pid(c);
  c.expect(',');
  m.mview = c.u64();
  c.expect(',');
  m.mvt = parse_vt(c);
  c.expect(',');
  m.payload = pct_decode(c.token());
  c.expect(')');
  return m;
}

WaitRecord parse_rec(Cursor& c) {
  WaitRecord r;
  c.expect('[');
  char k = c.take();
  if (k == 'b')
    r.kind = WaitKind::Bcast;
  else if (k == 'f')
    r.kind = WaitKind::Fwd;
  else
    throw CodecError("bad wait record kind");
  c.expect(',');
  r.msg = parse_msg(c);
  c.expect(',');
  r.index = parse_counter(c);
  c.expect(',');
  r.iset = parse_cpmap(c);
  c.expect(']');
  return r;
}

DonationBody parse_body(Cursor& c) {
  DonationBody b;
  c.expect('(');
  b.ghost_height = c.u64();
  c.expect(',');
  b.flush_height = c.u64();
  c.expect(',');
  b.mpkt_in = parse_cpmap(c);
  c.expect(',');
  c.expect('[');
  if (!c.try_take(']')) {
    while (true) {
      b.wait_set.push_back(parse_rec(c));
      if (c.try_take(']')) break;
      c.expect(';');
    }
  }
  c.expect(')');
  return b;
}

Packet parse_packet(Cursor& c) {
  Packet p;
  p.piggyback_height = c.u64();
  c.expect(':');
  char k = c.take();
  switch (k) {
    case 'M':
      p.body = MsgPacket{parse_msg(c)};
      break;
    case 'A':
      p.body = AckPacket{parse_mid(c)};
      break;
    case 'G':
      p.body = GhostPacket{c.u64()};
      break;
    case 'F':
      p.body = FlushPacket{c.u64()};
      break;
    case 'D':
      p.body = DonationPacket{parse_body(c)};
      break;
    case 'C':
      p.body = CoDonationPacket{parse_body(c)};
      break;
    default:
      throw CodecError("bad packet kind");
  }
  return p;
}

Notification parse_notification(Cursor& c) {
  Notification n;
  std::string tok = c.token();
  if (tok == "dead") {
    n.kind = Notification::Kind::Dead;
    return n;
  }
  c.expect('(');
  if (tok == "rm") {
    n.kind = Notification::Kind::Remove;
    n.pid = parse_pid(c);
  } else if (tok == "new") {
    n.kind = Notification::Kind::New;
    n.pid = parse_pid(c);
  } else if (tok == "jn") {
    n.kind = Notification::Kind::Join;
    n.pid = parse_pid(c);
    c.expect(',');
    n.parent = parse_pid(c);
  } else {
    throw CodecError("bad notification kind: " + tok);
  }
  c.expect(')');
  return n;
}

template <typename T, typename F>
T parse_whole(std::string_view text, F f) {
  Cursor c{text};
  T v = f(c);
  if (!c.done())
    throw CodecError("trailing input in \"" + std::string(text) + "\"");
  return v;
}

}  // namespace

std::string pct_encode(std::string_view bytes) {
  std::string out;
  out.reserve(bytes.size());
  for (unsigned char c : bytes) {
    if (pct_safe(static_cast<char>(c))) {
      out.push_back(static_cast<char>(c));
    } else {
      out.push_back('%');
      out.push_back(kHex[c >> 4]);
      out.push_back(kHex[c & 0xf]);
    }
  }
  return out;
}

std::string pct_decode(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (size_t i = 0; i < text.size(); ++i) {
    char c = text[i];
    if (c == '%') {
      if (i + 2 >= text.size()) throw CodecError("truncated %-escape");
      int hi = hex_val(text[i + 1]);
      int lo = hex_val(text[i + 2]);
      if (hi < 0 || lo < 0) throw CodecError("bad %-escape");
      out.push_back(static_cast<char>((hi << 4) | lo));
      i += 2;
    } else if (pct_safe(c)) {
      out.push_back(c);
    } else {
      throw CodecError("unsafe character in encoded text");
    }
  }
  return out;
}

std::string encode(const ProcessId& v) { return v.id; }

std::string encode(const CounterPair& v) {
  return "b" + std::to_string(v.b) + "f" + std::to_string(v.f);
}

std::string encode(const VectorTime& v) {
  std::string out = "{";
  bool first = true;
  for (const auto& [pid, val] : v) {
    if (!first) out += ",";
    first = false;
    out += pid.id + ":" + std::to_string(val);
  }
  return out + "}";
}

std::string encode(const std::map<ProcessId, CounterPair>& v) {
  std::string out = "{";
  bool first = true;
  for (const auto& [pid, cp] : v) {
    if (!first) out += ",";
    first = false;
    out += pid.id + ":" + encode(cp);
  }
  return out + "}";
}

std::string encode(const MessageId& v) {
  return "(" + std::to_string(v.mview) + "," + encode(v.mvt) + "," + v.orig.id +
         ")";
}

std::string encode(const StampedMessage& v) {
  return "(" + v.orig.id + "," + std::to_string(v.mview) + "," + encode(v.mvt) +
         "," + pct_encode(v.payload) + ")";
}

std::string encode(const WaitRecord& v) {
  return std::string("[") + (v.kind == WaitKind::Bcast ? "b" : "f") + "," +
         encode(v.msg) + "," + encode(v.index) + "," + encode(v.iset) + "]";
}

std::string encode(const DonationBody& v) {
  std::string out = "(" + std::to_string(v.ghost_height) + "," +
                    std::to_string(v.flush_height) + "," + encode(v.mpkt_in) +
                    ",[";
  bool first = true;
  for (const auto& rec : v.wait_set) {
    if (!first) out += ";";
    first = false;
    out += encode(rec);
  }
  return out + "])";
}

std::string encode(const Packet& v) {
  std::string out = std::to_string(v.piggyback_height) + ":";
  switch (packet_kind(v)) {
    case PacketKind::Msg:
      return out + "M" + encode(std::get<MsgPacket>(v.body).msg);
    case PacketKind::Ack:
      return out + "A" + encode(std::get<AckPacket>(v.body).id);
    case PacketKind::Ghost:
      return out + "G" + std::to_string(std::get<GhostPacket>(v.body).view);
    case PacketKind::Flush:
      return out + "F" + std::to_string(std::get<FlushPacket>(v.body).view);
    case PacketKind::Donation:
      return out + "D" + encode(std::get<DonationPacket>(v.body).body);
    case PacketKind::CoDonation:
      return out + "C" + encode(std::get<CoDonationPacket>(v.body).body);
  }
  throw CodecError("unknown packet kind");
}

std::string encode(const Notification& v) {
  switch (v.kind) {
    case Notification::Kind::Remove:
      return "rm(" + v.pid.id + ")";
    case Notification::Kind::Join:
      return "jn(" + v.pid.id + "," + v.parent.id + ")";
    case Notification::Kind::New:
      return "new(" + v.pid.id + ")";
    case Notification::Kind::Dead:
      return "dead";
  }
  throw CodecError("unknown notification kind");
}

ProcessId decode_process_id(std::string_view text) {
  return parse_whole<ProcessId>(text, parse_pid);
}
CounterPair decode_counter(std::string_view text) {
  return parse_whole<CounterPair>(text, parse_counter);
}
VectorTime decode_vector_time(std::string_view text) {
  return parse_whole<VectorTime>(text, parse_vt);
}
std::map<ProcessId, CounterPair> decode_counter_map(std::string_view text) {
  return parse_whole<std::map<ProcessId, CounterPair>>(text, parse_cpmap);
}
MessageId decode_message_id(std::string_view text) {
  return parse_whole<MessageId>(text, parse_mid);
}
StampedMessage decode_message(std::string_view text) {
  return parse_whole<StampedMessage>(text, parse_msg);
}
WaitRecord decode_wait_record(std::string_view text) {
  return parse_whole<WaitRecord>(text, parse_rec);
}
DonationBody decode_donation_body(std::string_view text) {
  return parse_whole<DonationBody>(text, parse_body);
}
Packet decode_packet(std::string_view text) {
  return parse_whole<Packet>(text, parse_packet);
}
Notification decode_notification(std::string_view text) {
  return parse_whole<Notification>(text, parse_notification);
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace cbcast::codec
