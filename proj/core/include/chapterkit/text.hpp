#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace chapterkit {

std::string trim(std::string_view s);
std::string to_lower_ascii(std::string_view s);

// Trim plus collapse of internal whitespace runs to a single space.
std::string collapse_whitespace(std::string_view s);

// The key used for case/whitespace-insensitive matching of labels, aliases
// and department names: collapse_whitespace + ASCII lowercase.
std::string canonical_key(std::string_view s);

// Split on '\n', dropping a trailing '\r' from each line. The final line is
// emitted even when the input has no trailing newline.
std::vector<std::string> split_lines(std::string_view s);

// Tokenizer used for vocabulary building and token-set comparisons: a token
// is a maximal run of ASCII alphanumerics (lowercased) and/or non-ASCII
// bytes (kept verbatim). Everything else separates tokens.
std::vector<std::string> tokenize(std::string_view text);

// RFC-4180-style CSV. parse_csv handles quoted fields, doubled quotes and
// embedded newlines; csv_escape quotes a field only when needed.
std::vector<std::vector<std::string>> parse_csv(std::string_view content,
                                                const std::string& origin = "csv");
std::string csv_escape(std::string_view field);

bool starts_with_icase(std::string_view s, std::string_view prefix);

}  // namespace chapterkit
