#include "litenext/config.hpp"

#include <fstream>
#include <sstream>

namespace litenext {

namespace {

int to_int(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    const int r = std::stoi(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return r;
  } catch (const std::exception&) {
    throw ConfigError("config: bad integer for " + key + ": \"" + v + "\"");
  }
}

double to_double(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    const double r = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return r;
  } catch (const std::exception&) {
    throw ConfigError("config: bad number for " + key + ": \"" + v + "\"");
  }
}

uint64_t to_u64(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    const uint64_t r = std::stoull(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return r;
  } catch (const std::exception&) {
    throw ConfigError("config: bad integer for " + key + ": \"" + v + "\"");
  }
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("config: bad boolean for " + key + ": \"" + v + "\"");
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

void RunConfig::apply(const std::string& key, const std::string& value) {
  if (key == "base_channels")
    model.base_channels = to_int(key, value);
  else if (key == "image_size")
    model.image_size = to_int(key, value);
  else if (key == "epochs")
    trainer.epochs = to_int(key, value);
  else if (key == "lr")
    trainer.lr = to_double(key, value);
  else if (key == "ema_alpha")
    trainer.ema_alpha = to_double(key, value);
  else if (key == "weight_decay")
    trainer.weight_decay = to_double(key, value);
  else if (key == "patience")
    trainer.patience = to_int(key, value);
  else if (key == "factor")
    trainer.factor = to_double(key, value);
  else if (key == "batch_size")
    trainer.batch_size = to_int(key, value);
  else if (key == "seed")
    trainer.seed = to_u64(key, value);
  else if (key == "val_fraction")
    trainer.val_fraction = to_double(key, value);
  else if (key == "serp")
    trainer.serp_enabled = to_bool(key, value);
  else if (key == "loss") {
    if (value == "mwl") {
      trainer.loss_mode = LossMode::kMwl;
    } else {
      trainer.loss_mode = LossMode::kBaseline;
      try {
        trainer.baseline = baseline_kind_from_string(value);
      } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("config: ") + e.what());
      }
    }
  } else if (key == "mwl_wb")
    trainer.mwl.w_b = to_double(key, value);
  else if (key == "mwl_wo")
    trainer.mwl.w_o = to_double(key, value);
  else if (key == "mwl_wm")
    trainer.mwl.w_m = to_double(key, value);
  else if (key == "mwl_k")
    trainer.mwl.k = to_int(key, value);
  else
    throw ConfigError("config: unknown key \"" + key + "\"");
}

void RunConfig::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot read " + path);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config: " + path + ":" + std::to_string(lineno) +
                        ": expected key=value, got \"" + line + "\"");
    apply(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
}

std::string RunConfig::loss_name() const {
  if (trainer.loss_mode == LossMode::kMwl) return "mwl";
  switch (trainer.baseline) {
    case BaselineKind::kBce:
      return "bce";
    case BaselineKind::kWbce:
      return "wbce";
    case BaselineKind::kBbce:
      return "bbce";
    case BaselineKind::kFocal:
      return "focal";
  }
  return "bce";
}

void RunConfig::write_file(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw ConfigError("config: cannot write " + path);
  out.precision(17);
  out << "base_channels=" << model.base_channels << "\n"
      << "image_size=" << model.image_size << "\n"
      << "epochs=" << trainer.epochs << "\n"
      << "lr=" << trainer.lr << "\n"
      << "ema_alpha=" << trainer.ema_alpha << "\n"
      << "weight_decay=" << trainer.weight_decay << "\n"
      << "patience=" << trainer.patience << "\n"
      << "factor=" << trainer.factor << "\n"
      << "batch_size=" << trainer.batch_size << "\n"
      << "seed=" << trainer.seed << "\n"
      << "val_fraction=" << trainer.val_fraction << "\n"
      << "serp=" << (trainer.serp_enabled ? "true" : "false") << "\n"
      << "loss=" << loss_name() << "\n"
      << "mwl_wb=" << trainer.mwl.w_b << "\n"
      << "mwl_wo=" << trainer.mwl.w_o << "\n"
      << "mwl_wm=" << trainer.mwl.w_m << "\n"
      << "mwl_k=" << trainer.mwl.k << "\n";
}

}  // namespace litenext
