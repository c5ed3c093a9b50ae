#pragma once

#include "eve/core/types.hpp"

#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>

#ifndef EVE_PROMPT_DIR
#define EVE_PROMPT_DIR "prompts"
#endif

namespace eve::verifiers {

// Directory holding the *.txt templates; EVE_PROMPT_DIR in the environment
// overrides the compiled-in location.
inline std::string prompt_directory() {
  if (const char* env = std::getenv("EVE_PROMPT_DIR")) return env;
  return EVE_PROMPT_DIR;
}

inline std::string load_prompt_template(std::string_view name, const std::string& dir = prompt_directory()) {
  const std::string path = dir + "/" + std::string(name) + ".txt";
  std::ifstream in(path);
  if (!in) throw Error("cannot open prompt template " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

// Replaces every {{KEY}} with its value. Unknown placeholders are an error,
// so a template edit cannot silently drop scene content.
inline std::string render_template(std::string_view tmpl, const std::map<std::string, std::string>& values) {
  std::string out;
  out.reserve(tmpl.size());
  std::size_t i = 0;
  while (i < tmpl.size()) {
    const auto open = tmpl.find("{{", i);
    if (open == std::string_view::npos) {
      out.append(tmpl.substr(i));
      break;
    }
    const auto close = tmpl.find("}}", open + 2);
    if (close == std::string_view::npos) throw Error("prompt template: unterminated placeholder");
    out.append(tmpl.substr(i, open - i));
    const std::string key(tmpl.substr(open + 2, close - open - 2));
    auto it = values.find(key);
    if (it == values.end()) throw Error("prompt template: no value for {{" + key + "}}");
    out.append(it->second);
    i = close + 2;
  }
  return out;
}

}  // namespace eve::verifiers
