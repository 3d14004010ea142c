#include "codegrag/problem.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace codegrag {

namespace {

std::vector<std::string> split_lines(const std::string& s) {
  std::vector<std::string> lines;
  std::stringstream ss(s);
  for (std::string line; std::getline(ss, line);) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

std::string dedent(const std::string& text) {
  auto lines = split_lines(text);
  // The first line sits right after the opening delimiter and does not count.
  std::size_t common = std::string::npos;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto& l = lines[i];
    const auto first = l.find_first_not_of(" \t");
    if (first == std::string::npos) continue;
    common = std::min(common, first);
  }
  std::string out;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    std::string l = lines[i];
    if (i == 0) l = trim(l);
    else if (common != std::string::npos && l.size() >= common) l = l.substr(common);
    else l = trim(l);
    out += l;
    if (i + 1 < lines.size()) out += "\n";
  }
  return trim(out);
}

bool starts_with(const std::string& s, const std::string& prefix) { return s.rfind(prefix, 0) == 0; }

std::string name_before_paren(const std::string& sig) {
  const auto paren = sig.find('(');
  if (paren == std::string::npos) return "";
  std::size_t end = paren;
  while (end > 0 && std::isspace(static_cast<unsigned char>(sig[end - 1]))) --end;
  std::size_t start = end;
  while (start > 0 && (std::isalnum(static_cast<unsigned char>(sig[start - 1])) || sig[start - 1] == '_')) --start;
  return sig.substr(start, end - start);
}

}  // namespace

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

Problem problem_from_json_line(const std::string& line, std::optional<Language> language) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& ex) {
    throw Error(ErrorCode::IoFailure, std::string("malformed problem record: ") + ex.what());
  }
  Problem p;
  p.task_id = j.value("task_id", std::string());
  p.prompt = j.value("prompt", std::string());
  p.declaration = j.value("declaration", std::string());
  p.canonical_solution = j.value("canonical_solution", std::string());
  p.test = j.value("test", std::string());
  p.entry_point = j.value("entry_point", std::string());
  if (language) {
    p.language = *language;
  } else if (j.contains("language")) {
    p.language = parse_language(j.at("language").get<std::string>());
  } else {
    const auto slash = p.task_id.find('/');
    if (slash == std::string::npos)
      throw Error(ErrorCode::UsageError, "cannot infer language of task '" + p.task_id + "'");
    p.language = parse_language(p.task_id.substr(0, slash));
  }
  if (p.task_id.empty()) throw Error(ErrorCode::IoFailure, "problem record lacks task_id");
  return p;
}

std::vector<Problem> load_problems(const std::string& path, std::optional<Language> language) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot read problems file " + path);
  std::vector<Problem> out;
  for (std::string line; std::getline(in, line);) {
    if (trim(line).empty()) continue;
    out.push_back(problem_from_json_line(line, language));
  }
  return out;
}

std::string problem_description(const Problem& p) {
  const std::string& text = p.prompt;
  if (p.language == Language::cpp) {
    const auto body = text.find('{');
    const auto open = text.find("/*");
    if (open != std::string::npos && (body == std::string::npos || open < body)) {
      const auto close = text.find("*/", open + 2);
      if (close != std::string::npos) return dedent(text.substr(open + 2, close - open - 2));
    }
    std::string out;
    for (const auto& l : split_lines(text)) {
      const std::string t = trim(l);
      if (starts_with(t, "//")) out += trim(t.substr(2)) + "\n";
      else if (!out.empty()) break;
    }
    return trim(out);
  }
  const auto def = text.find("def ");
  const std::size_t from = def == std::string::npos ? 0 : def;
  for (const char* quote : {"\"\"\"", "'''"}) {
    const auto open = text.find(quote, from);
    if (open == std::string::npos) continue;
    const auto close = text.find(quote, open + 3);
    if (close == std::string::npos) continue;
    return dedent(text.substr(open + 3, close - open - 3));
  }
  return "";
}

std::string problem_signature(const Problem& p) {
  const std::string& source = p.declaration.empty() ? p.prompt : p.declaration;
  if (p.language == Language::cpp) {
    std::string text = source;
    for (std::size_t open; (open = text.find("/*")) != std::string::npos;) {
      const auto close = text.find("*/", open + 2);
      text.erase(open, close == std::string::npos ? std::string::npos : close + 2 - open);
    }
    std::string out;
    for (const auto& l : split_lines(text)) {
      const std::string t = trim(l);
      if (t.empty() || t[0] == '#' || starts_with(t, "using ") || starts_with(t, "//")) continue;
      out += (out.empty() ? "" : " ") + t;
    }
    out = trim(out);
    while (!out.empty() && (out.back() == '{' || std::isspace(static_cast<unsigned char>(out.back())))) out.pop_back();
    return out;
  }
  const auto lines = split_lines(source);
  std::string best;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::string t = trim(lines[i]);
    if (!starts_with(t, "def ")) continue;
    std::string sig = t;
    for (std::size_t k = i + 1; k < lines.size() && trim(sig).back() != ':'; ++k) sig += " " + trim(lines[k]);
    if (!p.entry_point.empty() && name_before_paren(sig) == p.entry_point) return sig;
    best = sig;
  }
  return best;
}

std::string entry_point_of(const Problem& p) {
  if (!p.entry_point.empty()) return p.entry_point;
  return name_before_paren(problem_signature(p));
}

std::string task_key(const std::string& task_id) {
  const auto slash = task_id.rfind('/');
  return slash == std::string::npos ? task_id : task_id.substr(slash + 1);
}

bool task_id_less(const std::string& a, const std::string& b) {
  const auto sa = a.rfind('/');
  const auto sb = b.rfind('/');
  const std::string pa = sa == std::string::npos ? "" : a.substr(0, sa);
  const std::string pb = sb == std::string::npos ? "" : b.substr(0, sb);
  if (pa != pb) return pa < pb;
  const std::string ka = task_key(a);
  const std::string kb = task_key(b);
  const bool na = !ka.empty() && std::all_of(ka.begin(), ka.end(), [](unsigned char c) { return std::isdigit(c); });
  const bool nb = !kb.empty() && std::all_of(kb.begin(), kb.end(), [](unsigned char c) { return std::isdigit(c); });
  if (na && nb) {
    if (ka.size() != kb.size()) return ka.size() < kb.size();
    return ka < kb;
  }
  if (na != nb) return na;
  return ka < kb;
}

}  // namespace codegrag
