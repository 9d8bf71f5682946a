#pragma once

#include <optional>
#include <string>

namespace regen {

// Retrieval query for one class. Round-1 queries are the templated
// verbalizer alone; later rounds append a demonstration document.
struct Query {
    int class_label = 0;
    std::string text;
    int round = 1;
    std::optional<std::string> demo_doc_id;
    // Templated verbalizer without the demonstration (equals text in round 1).
    std::string template_text;
};

}  // namespace regen
