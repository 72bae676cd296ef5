#include "finsent/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include "finsent/errors.hpp"

namespace finsent {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

constexpr const char* kMagic = "finsent-checkpoint 1";

std::string read_line(std::istream& in, const char* what) {
    std::string line;
    if (!std::getline(in, line)) throw DataError(std::string("checkpoint truncated while reading ") + what);
    return line;
}

std::size_t count_after(const std::string& line, const std::string& keyword) {
    std::istringstream fields(line);
    std::string word;
    std::size_t count = 0;
    if (!(fields >> word >> count) || word != keyword) {
        throw DataError("checkpoint: expected '" + keyword + " <count>', got '" + line + "'");
    }
    return count;
}

std::map<std::string, std::string> read_config_section(std::istream& in) {
    if (read_line(in, "header") != kMagic) throw DataError("not a finsent checkpoint");
    const std::size_t n = count_after(read_line(in, "config header"), "config");
    std::map<std::string, std::string> values;
    for (std::size_t i = 0; i < n; ++i) {
        const std::string line = read_line(in, "config");
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw DataError("checkpoint: malformed config line '" + line + "'");
        values[line.substr(0, eq)] = line.substr(eq + 1);
    }
    return values;
}

}  // namespace

void save_checkpoint(std::ostream& out, const ModelConfig& config, const ModelParams& params) {
    const auto values = config.to_map();
    out << kMagic << '\n' << "config " << values.size() << '\n';
    for (const auto& [key, value] : values) out << key << '=' << value << '\n';
    const auto state = params.named_state();
    out << "tensors " << state.size() << '\n';
    for (const auto& [name, tensor] : state) {
        out << name << ' ' << tensor.rank();
        for (std::size_t d : tensor.shape()) out << ' ' << d;
        out << '\n';
        const auto data = tensor.data();
        out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size_bytes()));
        out << '\n';
    }
}

void save_checkpoint(const std::filesystem::path& path, const ModelConfig& config, const ModelParams& params) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write checkpoint " + path.string());
    save_checkpoint(out, config, params);
    if (!out) throw DataError("failed writing checkpoint " + path.string());
}

ModelConfig read_checkpoint_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open checkpoint " + path.string());
    return ModelConfig::from_map(read_config_section(in));
}

void load_checkpoint_state(std::istream& in, ModelParams& params) {
    read_config_section(in);
    const std::size_t n = count_after(read_line(in, "tensor header"), "tensors");

    std::map<std::string, Tensor> expected;
    for (auto& [name, tensor] : params.named_parameters()) expected.emplace(name, tensor);
    auto& bn = params.head_norm;

    std::set<std::string> seen;
    for (std::size_t i = 0; i < n; ++i) {
        std::istringstream header(read_line(in, "tensor header"));
        std::string name;
        std::size_t rank = 0;
        if (!(header >> name >> rank) || rank == 0) throw DataError("checkpoint: malformed tensor header");
        Shape shape(rank);
        for (auto& d : shape) {
            if (!(header >> d)) throw DataError("checkpoint: malformed shape for tensor '" + name + "'");
        }
        std::vector<double> values(shape_size(shape));
        in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(values.size() * sizeof(double)));
        if (!in || in.get() != '\n') throw DataError("checkpoint truncated inside tensor '" + name + "'");

        std::span<double> target;
        Shape target_shape;
        if (name == "head.norm.running_mean" || name == "head.norm.running_var") {
            auto& vec = name == "head.norm.running_mean" ? bn.running_mean : bn.running_var;
            target = vec;
            target_shape = {vec.size()};
        } else {
            auto it = expected.find(name);
            if (it == expected.end()) throw ShapeError("checkpoint tensor '" + name + "' does not exist in this model");
            target = it->second.mutable_data();
            target_shape = it->second.shape();
            if (!seen.insert(name).second) throw DataError("checkpoint stores tensor '" + name + "' twice");
        }
        if (shape != target_shape) {
            throw ShapeError("checkpoint tensor '" + name + "' has shape " + shape_string(shape) +
                             " but the model expects " + shape_string(target_shape));
        }
        std::copy(values.begin(), values.end(), target.begin());
    }
    for (const auto& entry : expected) {
        if (!seen.contains(entry.first)) {
            throw ShapeError("checkpoint has no tensor '" + entry.first + "' required by this model");
        }
    }
}

Checkpoint load_checkpoint(const std::filesystem::path& path) { return load_checkpoint(path, read_checkpoint_config(path)); }

Checkpoint load_checkpoint(const std::filesystem::path& path, const ModelConfig& config) {
    Checkpoint ckpt{config, ModelParams::initialize(config, 0)};
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open checkpoint " + path.string());
    load_checkpoint_state(in, ckpt.params);
    return ckpt;
}

}  // namespace finsent
