#include <filesystem>

#include "cli_common.hpp"
#include "ratio_forge/errors.hpp"
#include "ratio_forge/trace_io.hpp"

namespace ratio_forge::cli {

int cmd_report(const std::vector<std::string>& inputs, const std::vector<std::string>& labels,
               const std::string& output, Streams io) {
  if (inputs.empty()) throw InputError("report needs at least one input");
  if (!labels.empty() && labels.size() != inputs.size())
    throw InputError("expected one --label per input (" + std::to_string(inputs.size()) + ")");

  CsvTable combined;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const CsvTable t = read_csv(inputs[i]);
    const std::string label =
        labels.empty() ? std::filesystem::path(inputs[i]).stem().string() : labels[i];
    if (i == 0) {
      combined.header = {"run"};
      combined.header.insert(combined.header.end(), t.header.begin(), t.header.end());
    } else {
      const std::size_t width = combined.header.size() - 1;
      for (std::size_t c = 0; c < std::max(width, t.header.size()); ++c) {
        const std::string want = c < width ? combined.header[c + 1] : "<none>";
        const std::string got = c < t.header.size() ? t.header[c] : "<none>";
        if (want != got)
          throw InputError(inputs[i] + ": column " + std::to_string(c + 1) + " is '" + got +
                           "' but '" + inputs[0] + "' has '" + want + "'");
      }
    }
    for (const auto& row : t.rows) {
      std::vector<std::string> out{label};
      out.insert(out.end(), row.begin(), row.end());
      combined.rows.push_back(std::move(out));
    }
  }
  write_csv(output, combined);
  io.out << "runs=" << inputs.size() << " rows=" << combined.rows.size() << '\n';
  return 0;
}

}  // namespace ratio_forge::cli
