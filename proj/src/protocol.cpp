#include "pbg/protocol.hpp"

#include <algorithm>
#include <cctype>

#include "pbg/error.hpp"

namespace pbg {

std::string_view to_string(Protocol p) {
  switch (p) {
    case Protocol::PBG: return "PBG";
    case Protocol::PBG_CB: return "PBG_CB";
    case Protocol::FHS: return "FHS";
    case Protocol::CHS: return "CHS";
    case Protocol::NaiveBeeGees: return "NaiveBeeGees";
  }
  return "?";
}

std::optional<Protocol> parse_protocol(std::string_view name) {
  std::string key;
  for (char c : name) {
    if (c == '-' || c == '_' || c == ' ') continue;
    key.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  if (key == "pbg" || key == "pbeegees") return Protocol::PBG;
  if (key == "pbgcb" || key == "pbeegeescb" || key == "cb") return Protocol::PBG_CB;
  if (key == "fhs" || key == "fasthotstuff") return Protocol::FHS;
  if (key == "chs" || key == "hotstuff" || key == "chainedhotstuff") return Protocol::CHS;
  if (key == "naivebeegees" || key == "beegees" || key == "naive") return Protocol::NaiveBeeGees;
  return std::nullopt;
}

void ProtocolConfig::check() const {
  if (f < 1) throw Error(Errc::InvalidConfig, "f must be at least 1");
  if (n != 3 * f + 1) throw Error(Errc::InvalidConfig, "n must equal 3f + 1");
  if (pd.pd < 1) throw Error(Errc::InvalidConfig, "pd must be at least 1");
  if (!(delta > 0)) throw Error(Errc::InvalidConfig, "delta must be positive");
}

std::string_view message_kind(const Message& m) {
  struct Visitor {
    std::string_view operator()(const ProposalMsg&) const { return "proposal"; }
    std::string_view operator()(const Vote&) const { return "vote"; }
    std::string_view operator()(const TimeoutMsg&) const { return "timeout"; }
  };
  return std::visit(Visitor{}, m);
}

}  // namespace pbg
