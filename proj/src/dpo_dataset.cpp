#include "loopbreak/dpo_dataset.hpp"

#include <fstream>
#include <json.hpp>
#include <sstream>

#include "loopbreak/error.hpp"

namespace loopbreak {

namespace {

using ordered_json = nlohmann::ordered_json;

constexpr const char* kFields[] = {"instruction", "input", "chosen", "rejected"};

bool is_continuation_byte(char c) { return (static_cast<unsigned char>(c) & 0xC0) == 0x80; }

std::size_t offset_after(const std::string& text, const std::string& needle) {
  const auto at = text.find(needle);
  return at == std::string::npos ? text.size() : at + needle.size();
}

}  // namespace

std::size_t count_occurrences(const std::string& haystack, const std::string& needle) {
  if (needle.empty()) return 0;
  std::size_t count = 0;
  for (std::size_t at = haystack.find(needle); at != std::string::npos;
       at = haystack.find(needle, at + needle.size())) {
    ++count;
  }
  return count;
}

std::string build_rejected(const PreferenceSeed& seed, std::size_t n) {
  if (n == 0) throw InvalidArgument("repetition degree must be >= 1");
  if (seed.chosen.empty()) throw InvalidArgument("chosen text is empty");
  if (seed.repetition_unit.empty()) throw InvalidArgument("repetition unit is empty");
  const std::size_t at = seed.insertion_point.value_or(seed.chosen.size());
  if (at > seed.chosen.size()) {
    throw InvalidArgument("insertion point " + std::to_string(at) + " is past the end of chosen (" +
                          std::to_string(seed.chosen.size()) + " bytes)");
  }
  if (at < seed.chosen.size() && is_continuation_byte(seed.chosen[at])) {
    throw InvalidArgument("insertion point " + std::to_string(at) + " splits a UTF-8 character");
  }

  std::string unit = seed.repetition_unit;
  if (!seed.separator.empty() && !unit.ends_with(seed.separator)) unit += seed.separator;

  std::string out;
  out.reserve(seed.chosen.size() + n * unit.size());
  out.append(seed.chosen, 0, at);
  for (std::size_t i = 0; i < n; ++i) out += unit;
  out.append(seed.chosen, at);
  return out;
}

std::vector<PreferencePair> generate_pairs(const PreferenceSeed& seed,
                                           const std::vector<std::size_t>& degrees) {
  if (degrees.empty()) throw InvalidArgument("degree list is empty");
  std::vector<PreferencePair> pairs;
  pairs.reserve(degrees.size());
  for (const std::size_t n : degrees) {
    pairs.push_back({seed.instruction, seed.input, seed.chosen, build_rejected(seed, n), n});
  }
  return pairs;
}

void write_dataset(const std::vector<PreferencePair>& pairs, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  for (const auto& p : pairs) {
    ordered_json record;
    record["instruction"] = p.instruction;
    record["input"] = p.input;
    record["chosen"] = p.chosen;
    record["rejected"] = p.rejected;
    out << record.dump() << '\n';
  }
  out.flush();
  if (!out) throw IoError("write to " + path.string() + " failed");
}

std::vector<PreferencePair> read_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<PreferencePair> pairs;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = "line " + std::to_string(line_no);
    nlohmann::json record;
    try {
      record = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw FormatError(where + ": malformed record (" + e.what() + ")");
    }
    if (!record.is_object()) throw FormatError(where + ": record is not an object");
    std::string values[4];
    for (int f = 0; f < 4; ++f) {
      const auto it = record.find(kFields[f]);
      if (it == record.end()) throw FormatError(where + ": missing field '" + kFields[f] + "'");
      if (!it->is_string())
        throw FormatError(where + ": field '" + kFields[f] + "' is not a string");
      values[f] = it->get<std::string>();
    }
    if (record.size() != 4) throw FormatError(where + ": unexpected extra fields");
    pairs.push_back({values[0], values[1], values[2], values[3], 0});
  }
  return pairs;
}

std::vector<std::string> validate_pair(const PreferencePair& pair, const PreferenceSeed& seed) {
  std::vector<std::string> problems;
  if (pair.chosen != seed.chosen) problems.emplace_back("chosen not preserved");
  if (pair.instruction != seed.instruction) problems.emplace_back("instruction not preserved");
  if (pair.input != seed.input) problems.emplace_back("input not preserved");
  const std::size_t base = count_occurrences(seed.chosen, seed.repetition_unit);
  const std::size_t got = count_occurrences(pair.rejected, seed.repetition_unit);
  if (got != base + pair.degree) {
    std::ostringstream os;
    os << "degree mismatch: expected " << base + pair.degree << " occurrences, found " << got;
    problems.push_back(os.str());
  }
  return problems;
}

std::vector<PreferenceSeed> parse_seeds(const std::string& json_text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw InvalidConfig(std::string("seed file is not valid JSON: ") + e.what());
  }
  if (doc.is_object() && doc.contains("seeds")) doc = doc["seeds"];
  if (!doc.is_array()) throw InvalidConfig("seed file must hold an array of seeds");

  std::vector<PreferenceSeed> seeds;
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const auto& s = doc[i];
    const std::string where = "seed " + std::to_string(i);
    auto text = [&](const char* key, bool required) -> std::string {
      if (!s.contains(key)) {
        if (required) throw InvalidConfig(where + ": missing field '" + key + "'");
        return {};
      }
      if (!s[key].is_string()) throw InvalidConfig(where + ": field '" + key + "' is not a string");
      return s[key].get<std::string>();
    };
    PreferenceSeed seed;
    seed.instruction = text("instruction", true);
    seed.input = text("input", false);
    seed.chosen = text("chosen", true);
    seed.repetition_unit = text("repetition_unit", true);
    if (s.contains("separator")) seed.separator = text("separator", true);
    if (s.contains("insertion_point")) {
      const auto& ip = s["insertion_point"];
      if (ip.is_string() && ip.get<std::string>() == "end") {
        seed.insertion_point.reset();
      } else if (ip.is_number_unsigned()) {
        seed.insertion_point = ip.get<std::size_t>();
      } else {
        throw InvalidConfig(where + ": insertion_point must be a non-negative integer or \"end\"");
      }
    }
    seeds.push_back(std::move(seed));
  }
  return seeds;
}

std::vector<PreferenceSeed> builtin_seeds() {
  std::vector<PreferenceSeed> seeds;

  PreferenceSeed rules;
  rules.instruction = "列出该方法中的业务规则。";
  rules.input = "public void settle(Order order) { ... }";
  rules.chosen =
      "1. 订单状态必须为已支付\n"
      "2. 结算金额等于实付金额减去优惠金额\n"
      "3. 结算完成后写入结算流水\n";
  rules.repetition_unit = "2. 结算金额等于实付金额减去优惠金额\n";
  rules.insertion_point = offset_after(rules.chosen, rules.repetition_unit);
  seeds.push_back(rules);

  PreferenceSeed calls;
  calls.instruction = "List the calls made by OrderService:create in order.";
  calls.input = "OrderService:create";
  calls.chosen =
      "OrderService:validate\n"
      "BizCommonUtil:copyProperties\n"
      "OrderDao:insert\n"
      "EventBus:publish\n";
  calls.repetition_unit = "BizCommonUtil:copyProperties\n";
  calls.insertion_point = offset_after(calls.chosen, calls.repetition_unit);
  seeds.push_back(calls);

  PreferenceSeed closers;
  closers.instruction = "Write the activity diagram for the settlement flow.";
  closers.input = "settle";
  closers.chosen =
      "@startuml\n"
      "start\n"
      "if (paid?) then (yes)\n"
      "  :write ledger;\n"
      "endif\n"
      "stop\n"
      "@enduml\n";
  closers.repetition_unit = "endif";
  closers.insertion_point = offset_after(closers.chosen, "endif\n");
  seeds.push_back(closers);

  return seeds;
}

}  // namespace loopbreak
