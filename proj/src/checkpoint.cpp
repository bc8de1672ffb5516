#include "clv/checkpoint.hpp"

#include <cstring>
#include <fstream>

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

namespace clv {
namespace {

struct NamedParams {
    std::vector<std::string> names;
    nn::ParameterList<float> params;
};

NamedParams named(const Network& net) {
    NamedParams out;
    auto add = [&](const char* prefix, const nn::ParameterList<float>& ps) {
        for (auto* p : ps) {
            out.names.push_back(std::string(prefix) + p->name);
            out.params.push_back(p);
        }
    };
    add("encoder.", net.encoder.parameters());
    add("head.", net.head.parameters());
    add("classifier.", net.classifier.parameters());
    return out;
}

void put_u64(std::ostream& out, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    out.write(reinterpret_cast<const char*>(b), 8);
}

std::uint64_t get_u64(std::istream& in) {
    unsigned char b[8];
    in.read(reinterpret_cast<char*>(b), 8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
}

}  // namespace

void save_checkpoint(const Network& net, const ordered_json& config, const fs::path& file) {
    const auto np = named(net);
    const auto& spec = net.encoder.spec();
    ordered_json header;
    header["architecture"] = to_string(spec.architecture);
    header["encoder"] = {{"frames", spec.frames}, {"height", spec.height}, {"width", spec.width},
                         {"feature_dim", spec.feature_dim}};
    header["config"] = config;
    ordered_json tensors = ordered_json::array();
    for (std::size_t i = 0; i < np.params.size(); ++i) {
        tensors.push_back({{"name", np.names[i]}, {"rows", np.params[i]->value.rows()}, {"cols", np.params[i]->value.cols()}});
    }
    header["tensors"] = tensors;
    const std::string text = header.dump();

    if (file.has_parent_path()) fs::create_directories(file.parent_path());
    const fs::path tmp = file.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write " + tmp.string());
        out.write(kCheckpointMagic, sizeof kCheckpointMagic);
        put_u64(out, text.size());
        out.write(text.data(), static_cast<std::streamsize>(text.size()));
        for (const auto* p : np.params) {
            out.write(reinterpret_cast<const char*>(p->value.data()),
                      static_cast<std::streamsize>(p->value.size() * sizeof(float)));
        }
        if (!out) throw std::runtime_error("short write to " + tmp.string());
    }
    fs::rename(tmp, file);
}

LoadedCheckpoint load_checkpoint(const fs::path& file, std::optional<Architecture> expected) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw ContractError("cannot open checkpoint " + file.string());
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, kCheckpointMagic, 8) != 0) {
        throw ContractError(file.string() + " is not a checkpoint (bad magic)");
    }
    const std::uint64_t len = get_u64(in);
    if (!in || len > (1u << 26)) throw ContractError(file.string() + ": corrupt checkpoint header");
    std::string text(len, '\0');
    in.read(text.data(), static_cast<std::streamsize>(len));
    ordered_json header;
    try {
        header = ordered_json::parse(text);
    } catch (const std::exception& e) {
        throw ContractError(file.string() + ": unreadable checkpoint header: " + e.what());
    }

    EncoderSpec spec;
    spec.architecture = parse_architecture(header.at("architecture").get<std::string>());
    if (expected && *expected != spec.architecture) {
        throw ContractError("checkpoint " + file.string() + " holds a " + to_string(spec.architecture) +
                            " encoder, expected " + to_string(*expected));
    }
    const auto& enc = header.at("encoder");
    spec.frames = enc.at("frames").get<int>();
    spec.height = enc.at("height").get<int>();
    spec.width = enc.at("width").get<int>();
    spec.feature_dim = enc.at("feature_dim").get<int>();

    LoadedCheckpoint out;
    out.net = std::make_unique<Network>(spec, 0);
    out.config = header.at("config");
    const auto np = named(*out.net);
    const auto& tensors = header.at("tensors");
    if (tensors.size() != np.params.size()) {
        throw ContractError(file.string() + ": checkpoint has " + std::to_string(tensors.size()) + " tensors, network has " +
                            std::to_string(np.params.size()));
    }
    for (std::size_t i = 0; i < np.params.size(); ++i) {
        const auto& t = tensors[i];
        auto& value = np.params[i]->value;
        if (t.at("name").get<std::string>() != np.names[i] || t.at("rows").get<Eigen::Index>() != value.rows() ||
            t.at("cols").get<Eigen::Index>() != value.cols()) {
            throw ContractError(file.string() + ": tensor " + std::to_string(i) + " (" + t.at("name").get<std::string>() +
                                ") does not match " + np.names[i]);
        }
        in.read(reinterpret_cast<char*>(value.data()), static_cast<std::streamsize>(value.size() * sizeof(float)));
        if (!in) throw ContractError(file.string() + ": truncated tensor data at " + np.names[i]);
    }
    return out;
}

}  // namespace clv
