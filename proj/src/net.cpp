#include "covercall/net.hpp"

namespace covercall::net {

std::string to_string(const Endpoint& e) {
  return e.addr + ":" + std::to_string(e.port);
}

const char* kind_name(DatagramKind k) {
  switch (k) {
    case DatagramKind::Rtp:
      return "rtp";
    case DatagramKind::Rtcp:
      return "rtcp";
    case DatagramKind::Sip:
      return "sip";
  }
  return "?";
}

}  // namespace covercall::net
