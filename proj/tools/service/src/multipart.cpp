#include "relief_service/multipart.hpp"

#include <algorithm>
#include <cctype>

#include "relief/error.hpp"

namespace relief::service {
namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

// Value of `key=` inside a header such as Content-Disposition, quoted or not.
std::optional<std::string> header_param(std::string_view header, std::string_view key) {
  const std::string lowered = lower(header);
  std::size_t pos = 0;
  while ((pos = lowered.find(key, pos)) != std::string::npos) {
    const bool at_start = pos == 0 || lowered[pos - 1] == ';' || std::isspace(static_cast<unsigned char>(lowered[pos - 1]));
    const std::size_t eq = pos + key.size();
    if (at_start && eq < header.size() && header[eq] == '=') {
      std::string_view rest = header.substr(eq + 1);
      if (!rest.empty() && rest.front() == '"') {
        const std::size_t close = rest.find('"', 1);
        if (close == std::string_view::npos) return std::nullopt;
        return std::string(rest.substr(1, close - 1));
      }
      return std::string(trim(rest.substr(0, rest.find(';'))));
    }
    pos = eq;
  }
  return std::nullopt;
}

}  // namespace

std::optional<std::string> multipart_boundary(std::string_view content_type) {
  if (lower(content_type).find("multipart/form-data") == std::string::npos) return std::nullopt;
  auto b = header_param(content_type, "boundary");
  if (!b || b->empty()) return std::nullopt;
  return b;
}

std::vector<FormPart> parse_multipart(std::string_view body, std::string_view boundary) {
  const std::string delim = "--" + std::string(boundary);
  std::size_t pos = body.find(delim);
  if (pos == std::string_view::npos) throw Error(ErrorCode::MalformedFile, "multipart delimiter not found");
  std::vector<FormPart> parts;
  for (;;) {
    pos += delim.size();
    if (body.substr(pos, 2) == "--") break;  // closing delimiter
    if (body.substr(pos, 2) != "\r\n") throw Error(ErrorCode::MalformedFile, "malformed multipart delimiter line");
    pos += 2;
    const std::size_t header_end = body.find("\r\n\r\n", pos);
    if (header_end == std::string_view::npos) throw Error(ErrorCode::MalformedFile, "multipart part without headers");
    FormPart part;
    std::string_view headers = body.substr(pos, header_end - pos);
    while (!headers.empty()) {
      const std::size_t eol = headers.find("\r\n");
      const std::string_view line = headers.substr(0, eol);
      headers = eol == std::string_view::npos ? std::string_view{} : headers.substr(eol + 2);
      const std::size_t colon = line.find(':');
      if (colon == std::string_view::npos) continue;
      const std::string key = lower(trim(line.substr(0, colon)));
      const std::string_view value = trim(line.substr(colon + 1));
      if (key == "content-disposition") {
        part.name = header_param(value, "name").value_or("");
        part.filename = header_param(value, "filename").value_or("");
      } else if (key == "content-type") {
        part.content_type = std::string(value);
      }
    }
    const std::size_t data = header_end + 4;
    const std::size_t next = body.find("\r\n" + delim, data);
    if (next == std::string_view::npos) throw Error(ErrorCode::MalformedFile, "unterminated multipart part");
    part.body = body.substr(data, next - data);
    parts.push_back(std::move(part));
    pos = next + 2;
  }
  return parts;
}

}  // namespace relief::service
