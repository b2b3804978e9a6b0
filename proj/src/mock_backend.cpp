#include <algorithm>

#include <fmt/format.h>

#include "hoir/ingest.hpp"
#include "hoir/provider.hpp"

namespace hoir {

namespace {

std::string_view trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string unescape(std::string_view s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '\\' && i + 1 < s.size()) {
      char c = s[i + 1];
      if (c == 'n' || c == 't' || c == '\\') {
        out += c == 'n' ? '\n' : c == 't' ? '\t' : '\\';
        ++i;
        continue;
      }
    }
    out += s[i];
  }
  return out;
}

bool looks_like_triplet(std::string_view key) {
  return key.size() > 2 && key.front() == '<' && key.back() == '>' &&
         std::count(key.begin(), key.end(), ',') >= 2;
}

}  // namespace

MockRuleTable::MockRuleTable(std::vector<MockRule> rules) : rules_(std::move(rules)) {}

MockRuleTable MockRuleTable::parse(std::string_view text) {
  std::vector<MockRule> rules;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    ++line_no;
    std::string_view line = text.substr(start, end - start);
    start = end + 1;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (trim(line).empty() || trim(line).front() == '#') continue;

    auto t1 = line.find('\t');
    auto t2 = t1 == std::string_view::npos ? t1 : line.find('\t', t1 + 1);
    if (t2 == std::string_view::npos)
      throw ParseError(fmt::format("line {}", line_no), "expected matcher_kind<TAB>key<TAB>response");
    std::string_view kind = trim(line.substr(0, t1));
    MockRule rule;
    rule.key = std::string(line.substr(t1 + 1, t2 - t1 - 1));
    rule.response = unescape(line.substr(t2 + 1));
    if (kind == "exact-triplet") {
      rule.matcher = MockRule::Matcher::exact_triplet;
      if (!looks_like_triplet(rule.key))
        throw ParseError(fmt::format("line {}, field key", line_no),
                         fmt::format("\"{}\" is not a <person,relation,object> triplet", rule.key));
    } else if (kind == "relation-name") {
      rule.matcher = MockRule::Matcher::relation_name;
    } else if (kind == "contains-substring") {
      rule.matcher = MockRule::Matcher::contains_substring;
    } else {
      throw ParseError(fmt::format("line {}, field matcher_kind", line_no),
                       fmt::format("unknown matcher \"{}\"", kind));
    }
    if (rule.key.empty()) throw ParseError(fmt::format("line {}, field key", line_no), "empty key");
    if (rule.response.empty())
      throw ParseError(fmt::format("line {}, field response", line_no), "empty response");
    rules.push_back(std::move(rule));
  }
  return MockRuleTable(std::move(rules));
}

MockRuleTable MockRuleTable::load(const std::filesystem::path& path) {
  try {
    return parse(read_text_file(path));
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ", " + e.location(), e.what());
  }
}

std::optional<std::string> MockRuleTable::match(std::string_view query) const {
  for (const auto& rule : rules_) {
    bool hit = false;
    switch (rule.matcher) {
      case MockRule::Matcher::exact_triplet:
      case MockRule::Matcher::contains_substring:
        hit = query.find(rule.key) != std::string_view::npos;
        break;
      case MockRule::Matcher::relation_name:
        hit = trim(query) == rule.key ||
              query.find("<person," + rule.key + ",") != std::string_view::npos;
        break;
    }
    if (hit) return rule.response;
  }
  return std::nullopt;
}

std::vector<std::string> extract_test_inputs(std::string_view prompt) {
  constexpr std::string_view kInput = "Input: ";
  constexpr std::string_view kOutput = "Output:";
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start < prompt.size()) {
    std::size_t end = prompt.find('\n', start);
    if (end == std::string_view::npos) end = prompt.size();
    std::string_view line = trim(prompt.substr(start, end - start));
    start = end + 1;
    if (line.size() >= kInput.size() + kOutput.size() && line.substr(0, kInput.size()) == kInput &&
        line.substr(line.size() - kOutput.size()) == kOutput) {
      out.emplace_back(trim(line.substr(kInput.size(), line.size() - kInput.size() - kOutput.size())));
    }
  }
  return out;
}

std::string MockRuleTable::respond(std::string_view prompt) const {
  auto tests = extract_test_inputs(prompt);
  if (tests.empty()) return match(prompt).value_or(std::string(kDefaultResponse));
  std::string out;
  for (const auto& test : tests) {
    if (!out.empty()) out += '\n';
    out += match(test).value_or(std::string(kDefaultResponse));
  }
  return out;
}

CompletionResponse mock_complete(const MockRuleTable& rules, const CompletionRequest& request) {
  if (request.prompt.empty()) throw PreconditionError("completion prompt is empty");
  return {rules.respond(request.prompt), false, 0.0};
}

std::string MockBackend::send(const CompletionRequest& request) { return rules_.respond(request.prompt); }

}  // namespace hoir
