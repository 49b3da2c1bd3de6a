#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace relief::service {

struct FormPart {
  std::string name;
  std::string filename;
  std::string content_type;
  std::string_view body;  // view into the request body
};

/// Boundary parameter of a multipart/form-data Content-Type, if any.
std::optional<std::string> multipart_boundary(std::string_view content_type);

/// Splits a multipart/form-data body. Throws relief::Error(MalformedFile)
/// on a missing delimiter or part without headers.
std::vector<FormPart> parse_multipart(std::string_view body, std::string_view boundary);

}  // namespace relief::service
