#include "stylemix/transfer.hpp"

#include <cmath>

#include "json.hpp"
#include "stylemix/errors.hpp"
#include "stylemix/latent_tools.hpp"

namespace stylemix {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};

void check_stack(const Generator& gen, const StyleStack& s, const char* what) {
  if (s.num_layers() != gen.num_layers()) throw DomainError(std::string(what) + " has the wrong number of layers");
  for (const auto& row : s.rows())
    if (static_cast<int>(row.values.size()) != gen.config().latent_dim)
      throw DomainError(std::string(what) + " has the wrong style width");
}

int resolved_layer_cut(const Generator& gen, const TransferRequest& req) {
  return req.layer_cut.value_or(default_layer_cut(gen.num_layers()));
}

int resolved_pose_dims(const Generator& gen, const TransferRequest& req) {
  return req.pose_k_dims.value_or(default_pose_dims(gen.config().latent_dim));
}

AlphaMask mask_from_json(const nlohmann::json& j) {
  const int h = j.at("height").get<int>();
  const int w = j.at("width").get<int>();
  if (h < 1 || w < 1) throw DomainError("mask dimensions must be positive");
  if (j.contains("constant")) return AlphaMask::constant(h, w, j.at("constant").get<double>());
  if (j.contains("box")) {
    const auto b = j.at("box").get<std::vector<int>>();
    if (b.size() != 4) throw DomainError("mask box needs four integers");
    return make_box_mask(h, w, Box{b[0], b[1], b[2], b[3]}, j.value("feather", 0));
  }
  if (j.contains("values")) {
    Plane p(h, w);
    const auto v = j.at("values").get<std::vector<double>>();
    if (v.size() != p.data.size()) throw DomainError("mask values do not match its dimensions");
    p.data = v;
    return AlphaMask(std::move(p));
  }
  throw DomainError("mask needs one of constant, box, values");
}

}  // namespace

int default_layer_cut(int num_layers) {
  if (num_layers < 1) throw ConfigError("generator needs at least one layer");
  const int cut = (12 * num_layers + 13) / 14;
  return std::min(cut, num_layers - 1);
}

void TransferRequest::validate(const Generator& gen) const {
  check_stack(gen, src_styles, "src_styles");
  check_stack(gen, ref_styles, "ref_styles");
  const int res = gen.output_resolution();
  if (box.x0 < 0 || box.y0 < 0 || box.x1 > res || box.y1 > res || box.x0 > box.x1 || box.y0 > box.y1)
    throw RangeError("box lies outside the output");
  if (feather < 0) throw RangeError("feather must be non-negative");
  const int cut = resolved_layer_cut(gen, *this);
  if (cut < 0 || cut >= gen.num_layers()) throw RangeError("layer_cut must be in [0, L)");
  if (!(alpha_exponent >= 1.0) || !std::isfinite(alpha_exponent)) throw RangeError("alpha_exponent must be >= 1");
  const int k = resolved_pose_dims(gen, *this);
  if (k < 0 || k > gen.num_layers() * gen.config().latent_dim) throw RangeError("pose_k_dims out of range");
}

StyleStack aligned_reference(const Generator& gen, const TransferRequest& req) {
  return pose_align(req.ref_styles, req.src_styles, resolved_pose_dims(gen, req));
}

AlphaMask transfer_mask(const Generator& gen, const TransferRequest& req) {
  const int res = gen.output_resolution();
  if (req.box.empty()) return AlphaMask::constant(res, res, 0.0);
  return make_box_mask(res, res, req.box, req.feather).pow(req.alpha_exponent);
}

Image transfer_attributes(const Generator& gen, const TransferRequest& req) {
  req.validate(gen);
  BlendSpec spec;
  spec.layer_set = layers_up_to(resolved_layer_cut(gen, req));
  spec.mask = transfer_mask(gen, req);
  spec.mode = BlendMode::two_image;
  return render_two_image_blend(gen, req.src_styles, aligned_reference(gen, req), spec);
}

int step_layer(const VariationStep& step) {
  return std::visit([](const auto& s) { return s.layer; }, step);
}

void apply_variation_step(const VariationStep& step, Tensor4& features) {
  std::visit(overloaded{
                 [&](const ShiftBlendStep& s) {
                   features = shift_blend(FeatureMap{s.layer, features}, s.mask, s.shift).data;
                 },
                 [&](const PadStep& s) { features = pad_tensor(features, s.pad); },
                 [&](const ResizeStep& s) { features = resize_features(FeatureMap{s.layer, features}, s.resize).data; },
             },
             step);
}

Image single_image_variations(const Generator& gen, const StyleVector& w, const std::vector<VariationStep>& recipe) {
  for (const auto& step : recipe) {
    const int layer = step_layer(step);
    if (layer < 0 || layer >= gen.num_layers()) throw RangeError("recipe step layer out of range");
  }
  HookSet hooks;
  if (!recipe.empty()) {
    hooks.transform = [&recipe](int layer, Tensor4& f) {
      for (const auto& step : recipe)
        if (step_layer(step) == layer) apply_variation_step(step, f);
    };
  }
  return gen.synthesize(expand_to_stack(w, gen.num_layers()), hooks).image;
}

std::vector<VariationStep> recipe_from_json(const std::string& text) {
  std::vector<VariationStep> recipe;
  try {
    const auto j = nlohmann::json::parse(text);
    if (!j.is_array()) throw DomainError("recipe must be a JSON array");
    for (const auto& s : j) {
      const auto op = s.at("op").get<std::string>();
      const int layer = s.value("layer", kDefaultSpatialLayer);
      if (op == "pad") {
        PadStep p;
        p.layer = layer;
        p.pad.mode = pad_mode_from_string(s.value("mode", std::string("reflect")));
        p.pad.left = s.value("left", 0);
        p.pad.right = s.value("right", 0);
        p.pad.top = s.value("top", 0);
        p.pad.bottom = s.value("bottom", 0);
        recipe.emplace_back(p);
      } else if (op == "resize") {
        ResizeStep r;
        r.layer = layer;
        r.resize.method = resize_method_from_string(s.value("method", std::string("bilinear")));
        if (s.contains("height") || s.contains("width"))
          r.resize.target = std::make_pair(s.at("height").get<int>(), s.at("width").get<int>());
        if (s.contains("scale")) {
          const auto sc = s.at("scale").get<std::vector<int>>();
          if (sc.size() != 2) throw DomainError("resize scale needs [num, den]");
          r.resize.scale_num = sc[0];
          r.resize.scale_den = sc[1];
        }
        recipe.emplace_back(r);
      } else if (op == "shift_blend") {
        ShiftBlendStep b;
        b.layer = layer;
        b.shift = ShiftSpec{s.value("dy", 0), s.value("dx", 0)};
        b.mask = mask_from_json(s.at("mask"));
        recipe.emplace_back(std::move(b));
      } else {
        throw DomainError("unknown recipe op '" + op + "'");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw DomainError(std::string("malformed recipe: ") + e.what());
  }
  return recipe;
}

std::string recipe_to_json(const std::vector<VariationStep>& recipe) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& step : recipe) {
    nlohmann::json s;
    s["layer"] = step_layer(step);
    std::visit(overloaded{
                   [&](const ShiftBlendStep& b) {
                     s["op"] = "shift_blend";
                     s["dy"] = b.shift.dy;
                     s["dx"] = b.shift.dx;
                     s["mask"] = {{"height", b.mask.height()}, {"width", b.mask.width()}, {"values", b.mask.plane().data}};
                   },
                   [&](const PadStep& p) {
                     s["op"] = "pad";
                     s["mode"] = to_string(p.pad.mode);
                     s["left"] = p.pad.left;
                     s["right"] = p.pad.right;
                     s["top"] = p.pad.top;
                     s["bottom"] = p.pad.bottom;
                   },
                   [&](const ResizeStep& r) {
                     s["op"] = "resize";
                     s["method"] = r.resize.method == ResizeMethod::nearest ? "nearest" : "bilinear";
                     if (r.resize.target) {
                       s["height"] = r.resize.target->first;
                       s["width"] = r.resize.target->second;
                     }
                     s["scale"] = {r.resize.scale_num, r.resize.scale_den};
                   },
               },
               step);
    j.push_back(std::move(s));
  }
  return j.dump(2);
}

std::vector<Image> continuous_translation_sweep(const Generator& gen_a, const Generator& gen_b,
                                                const StyleStack& styles, const std::vector<double>& alphas) {
  if (!(gen_a.config() == gen_b.config())) throw ConfigError("translation sweep requires identical configs");
  std::vector<Image> out;
  out.reserve(alphas.size());
  for (double a : alphas) {
    if (!(a >= 0.0 && a <= 1.0)) throw RangeError("alpha must lie in [0, 1]");
    BlendSpec spec;
    spec.layer_set = all_layers(gen_a.num_layers());
    spec.mode = BlendMode::constant;
    spec.constant_alpha = a;
    out.push_back(render_cross_generator_blend(gen_a, gen_b, styles, spec));
  }
  return out;
}

}  // namespace stylemix
