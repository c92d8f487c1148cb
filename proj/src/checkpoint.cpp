#include "pointattn/checkpoint.hpp"

#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace pointattn::model {

namespace {

constexpr const char* kMagic = "pointattn-checkpoint v1";

void write_tensor_line(std::ostream& out, const std::string& name, const Shape& shape,
                       const Eigen::ArrayXd& values) {
    out << "tensor " << name << ' ' << shape.size();
    for (Eigen::Index e : shape) out << ' ' << e;
    out << " :";
    char buf[40];
    for (Eigen::Index i = 0; i < values.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%.17g", values[i]);
        out << ' ' << buf;
    }
    out << '\n';
}

}  // namespace

void save_checkpoint(const std::string& path, Network& net,
                     const std::vector<std::pair<std::string, std::string>>& meta) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write checkpoint: " + path);

    out << kMagic << '\n';
    for (const auto& [k, v] : net.config().to_entries()) out << "config " << k << ' ' << v << '\n';
    for (const auto& [k, v] : meta) out << "meta " << k << ' ' << v << '\n';
    for (const auto& p : net.parameters()) {
        write_tensor_line(out, p.name, p.tensor.shape(), p.tensor.values());
    }
    for (const auto& [name, buf] : net.buffers()) {
        write_tensor_line(out, name, {buf->size()}, *buf);
    }
    out << "end\n";
    if (!out) throw std::runtime_error("checkpoint write failed: " + path);
}

Network load_checkpoint(const std::string& path,
                        std::vector<std::pair<std::string, std::string>>* meta_out) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open checkpoint: " + path);

    std::string line;
    if (!std::getline(in, line) || line != kMagic) {
        throw std::runtime_error(path + ": not a checkpoint file");
    }

    std::vector<std::pair<std::string, std::string>> config_entries;
    std::vector<std::pair<std::string, std::string>> meta;
    struct StoredTensor {
        Shape shape;
        Eigen::ArrayXd values;
    };
    std::map<std::string, StoredTensor> tensors;

    bool saw_end = false;
    size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream fields(line);
        std::string kind;
        fields >> kind;
        const auto fail = [&](const std::string& why) {
            throw std::runtime_error(path + ":" + std::to_string(lineno) + ": " + why);
        };
        if (kind == "end") {
            saw_end = true;
            break;
        } else if (kind == "config" || kind == "meta") {
            std::string key, value;
            if (!(fields >> key >> value)) fail("expected '" + kind + " <key> <value>'");
            (kind == "config" ? config_entries : meta).emplace_back(key, value);
        } else if (kind == "tensor") {
            std::string name;
            size_t rank;
            if (!(fields >> name >> rank)) fail("malformed tensor header");
            StoredTensor st;
            Eigen::Index count = 1;
            for (size_t i = 0; i < rank; ++i) {
                Eigen::Index e;
                if (!(fields >> e) || e <= 0) fail("bad tensor extent");
                st.shape.push_back(e);
                count *= e;
            }
            std::string colon;
            if (!(fields >> colon) || colon != ":") fail("missing ':' in tensor line");
            st.values.resize(count);
            for (Eigen::Index i = 0; i < count; ++i) {
                if (!(fields >> st.values[i])) fail("short tensor data for " + name);
            }
            if (!tensors.emplace(name, std::move(st)).second) fail("duplicate tensor " + name);
        } else {
            fail("unknown record '" + kind + "'");
        }
    }
    if (!saw_end) throw std::runtime_error(path + ": truncated checkpoint (no end marker)");

    Network net(ModelConfig::from_entries(config_entries), 0);

    for (auto& p : net.parameters()) {
        auto it = tensors.find(p.name);
        if (it == tensors.end()) {
            throw std::runtime_error(path + ": checkpoint is missing parameter " + p.name);
        }
        if (it->second.shape != p.tensor.shape()) {
            throw std::runtime_error(path + ": shape mismatch for " + p.name + ": stored " +
                                     shape_str(it->second.shape) + ", model wants " +
                                     shape_str(p.tensor.shape()));
        }
        p.tensor.values() = it->second.values;
        tensors.erase(it);
    }
    for (auto& [name, buf] : net.buffers()) {
        auto it = tensors.find(name);
        if (it == tensors.end()) {
            throw std::runtime_error(path + ": checkpoint is missing buffer " + name);
        }
        if (it->second.values.size() != buf->size()) {
            throw std::runtime_error(path + ": size mismatch for buffer " + name);
        }
        *buf = it->second.values;
        tensors.erase(it);
    }
    if (!tensors.empty()) {
        throw std::runtime_error(path + ": checkpoint holds unknown tensor " + tensors.begin()->first);
    }

    if (meta_out) *meta_out = std::move(meta);
    return net;
}

}  // namespace pointattn::model
