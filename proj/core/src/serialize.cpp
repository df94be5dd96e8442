#include <json.hpp>

#include <cstdio>
#include <sstream>
#include <string>

#include "sdcf/model.hpp"

namespace sdcf {

namespace {

using nlohmann::json;

// Writer side is hand-rolled so every float lands in the file at 17
// significant digits (exact round-trip for 64-bit values); the reader is
// ordinary JSON parsing.
std::string num(double v) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void append_mat(std::ostringstream& out, const Mat& m, const char* indent) {
    out << "{\"rows\": " << m.rows() << ", \"cols\": " << m.cols() << ",\n"
        << indent << " \"data\": [";
    for (std::size_t i = 0; i < m.size(); ++i) {
        if (i) out << ", ";
        out << num(m.values()[i]);
    }
    out << "]}";
}

Mat mat_from_json(const json& j) {
    return Mat(j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>(),
               j.at("data").get<std::vector<double>>());
}

ArchConfig arch_from_json(const json& j) {
    ArchConfig a;
    a.num_channels = j.at("num_channels").get<std::size_t>();
    for (const json& l : j.at("layers")) {
        LayerSpec ls;
        ls.conv.in_channels = l.at("in").get<std::size_t>();
        ls.conv.out_channels = l.at("out").get<std::size_t>();
        ls.conv.kernel_size = l.at("kernel").get<std::size_t>();
        ls.activation = activation_from_name(l.at("activation").get<std::string>());
        ls.pool = l.at("pool").get<bool>();
        a.layers.push_back(ls);
    }
    a.window_size = j.at("window_size").get<std::size_t>();
    a.fusion_out = j.at("fusion_out").get<std::size_t>();
    a.num_classes = j.at("num_classes").get<std::size_t>();
    a.mu = j.at("mu").get<double>();
    a.lambda = j.at("lambda").get<double>();
    a.prox_inference = j.at("prox_inference").get<bool>();
    return a;
}

} // namespace

std::string model_to_json(const SdcfModel& model) {
    const ArchConfig& a = model.arch;
    std::ostringstream out;
    out << "{\n  \"arch\": {\n    \"num_channels\": " << a.num_channels
        << ",\n    \"layers\": [\n";
    for (std::size_t l = 0; l < a.layers.size(); ++l) {
        const LayerSpec& ls = a.layers[l];
        out << "      {\"in\": " << ls.conv.in_channels
            << ", \"out\": " << ls.conv.out_channels
            << ", \"kernel\": " << ls.conv.kernel_size << ", \"activation\": \""
            << activation_name(ls.activation) << "\", \"pool\": "
            << (ls.pool ? "true" : "false") << "}";
        out << (l + 1 < a.layers.size() ? ",\n" : "\n");
    }
    out << "    ],\n    \"window_size\": " << a.window_size
        << ",\n    \"fusion_out\": " << a.fusion_out
        << ",\n    \"num_classes\": " << a.num_classes << ",\n    \"mu\": " << num(a.mu)
        << ",\n    \"lambda\": " << num(a.lambda) << ",\n    \"prox_inference\": "
        << (a.prox_inference ? "true" : "false") << "\n  },\n";

    out << "  \"banks\": [\n";
    for (std::size_t c = 0; c < model.banks.size(); ++c) {
        out << "    [\n";
        const FilterBank& bank = model.banks[c];
        for (std::size_t l = 0; l < bank.layers.size(); ++l) {
            out << "      ";
            append_mat(out, bank.layers[l], "      ");
            out << (l + 1 < bank.layers.size() ? ",\n" : "\n");
        }
        out << "    ]" << (c + 1 < model.banks.size() ? ",\n" : "\n");
    }
    out << "  ],\n  \"fusion\": [\n";
    for (std::size_t c = 0; c < model.fusion.size(); ++c) {
        out << "    ";
        append_mat(out, model.fusion[c], "    ");
        out << (c + 1 < model.fusion.size() ? ",\n" : "\n");
    }
    out << "  ],\n  \"classifier\": ";
    append_mat(out, model.classifier, "  ");
    out << "\n}\n";
    return out.str();
}

SdcfModel model_from_json(const std::string& text) {
    const json doc = json::parse(text);
    SdcfModel m;
    m.arch = arch_from_json(doc.at("arch"));
    for (const json& b : doc.at("banks")) {
        FilterBank bank;
        for (const json& t : b) bank.layers.push_back(mat_from_json(t));
        m.banks.push_back(std::move(bank));
    }
    for (const json& t : doc.at("fusion")) m.fusion.push_back(mat_from_json(t));
    m.classifier = mat_from_json(doc.at("classifier"));
    return m;
}

} // namespace sdcf
