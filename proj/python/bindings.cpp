// SPDX-License-Identifier: Apache-2.0
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstring>

#include "patchcrypt/blockcipher.hpp"
#include "patchcrypt/embedding.hpp"
#include "patchcrypt/keyschedule.hpp"
#include "patchcrypt/segmetrics.hpp"
#include "patchcrypt/tensorarchive.hpp"

namespace py = pybind11;
using namespace patchcrypt;

namespace {

using U8Array = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>;
using F32Array = py::array_t<float, py::array::c_style | py::array::forcecast>;

Image image_from_array(const U8Array& arr) {
  if (arr.ndim() != 3 || arr.shape(2) != 3) {
    throw py::value_error("image must be a (height, width, 3) uint8 array");
  }
  const auto* p = arr.data();
  return Image(static_cast<std::size_t>(arr.shape(1)), static_cast<std::size_t>(arr.shape(0)),
               std::vector<std::uint8_t>(p, p + arr.size()));
}

U8Array image_to_array(const Image& img) {
  U8Array out({img.height(), img.width(), Image::kChannels});
  std::memcpy(out.mutable_data(), img.data().data(), img.data().size());
  return out;
}

LabelMap labels_from_array(const U8Array& arr) {
  if (arr.ndim() != 2) throw py::value_error("label map must be a (height, width) uint8 array");
  const auto* p = arr.data();
  return LabelMap(static_cast<std::size_t>(arr.shape(1)), static_cast<std::size_t>(arr.shape(0)),
                  std::vector<std::uint8_t>(p, p + arr.size()));
}

std::vector<std::uint8_t> bytes_of(const py::bytes& b) {
  std::string_view s = b;
  return {s.begin(), s.end()};
}

py::bytes to_bytes(const std::vector<std::uint8_t>& v) {
  return py::bytes(reinterpret_cast<const char*>(v.data()), v.size());
}

py::dict report_dict(const EquivalenceReport& r) {
  py::dict d;
  d["max_abs_diff"] = r.max_abs_diff;
  d["mean_abs_diff"] = r.mean_abs_diff;
  d["tokens"] = r.token_count;
  d["pass"] = r.pass;
  return d;
}

std::optional<std::size_t> optional_patch(std::optional<std::size_t> p) { return p; }

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Block-wise image encryption and patch-embedding adaptation";

  static py::exception<Error> base_error(m, "PatchcryptError", PyExc_ValueError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::set_error(base_error, e.what());
    }
  });

  py::class_<SecretKey>(m, "SecretKey")
      .def_static("generate", &keygen, "32 bytes from the OS CSPRNG")
      .def_static("from_hex", &parse_key, py::arg("hex"))
      .def_static(
          "from_bytes",
          [](const py::bytes& b) {
            std::string_view s = b;
            if (s.size() != SecretKey::kSize) throw py::value_error("key must be 32 bytes");
            SecretKey::Bytes raw{};
            std::memcpy(raw.data(), s.data(), raw.size());
            return SecretKey(raw);
          },
          py::arg("data"))
      .def("hex", &SecretKey::hex)
      .def("__bytes__",
           [](const SecretKey& k) {
             return py::bytes(reinterpret_cast<const char*>(k.bytes().data()), k.bytes().size());
           })
      .def("__eq__", [](const SecretKey& a, const SecretKey& b) { return a == b; })
      .def("__repr__", [](const SecretKey&) { return std::string("<SecretKey>"); });

  m.def("derive_seed", &derive_seed, py::arg("key"));
  m.def(
      "generate_permutation",
      [](const SecretKey& key, std::size_t n) {
        auto p = generate_permutation(key, n);
        return std::vector<std::uint32_t>(p.forward().begin(), p.forward().end());
      },
      py::arg("key"), py::arg("n"));
  m.def(
      "invert_permutation",
      [](std::vector<std::uint32_t> forward) {
        auto inv = invert(Permutation(std::move(forward)));
        return std::vector<std::uint32_t>(inv.forward().begin(), inv.forward().end());
      },
      py::arg("forward"));

  m.def(
      "encrypt_image",
      [](const U8Array& img, const SecretKey& key, std::size_t patch_size) {
        return image_to_array(encrypt_image(image_from_array(img), key, patch_size));
      },
      py::arg("image"), py::arg("key"), py::arg("patch_size") = 16);
  m.def(
      "decrypt_image",
      [](const U8Array& img, const SecretKey& key, std::size_t patch_size) {
        return image_to_array(decrypt_image(image_from_array(img), key, patch_size));
      },
      py::arg("image"), py::arg("key"), py::arg("patch_size") = 16);
  m.def(
      "read_ppm", [](const py::bytes& b) { return image_to_array(read_ppm(bytes_of(b))); },
      py::arg("data"));
  m.def(
      "write_ppm", [](const U8Array& img) { return to_bytes(write_ppm(image_from_array(img))); },
      py::arg("image"));

  py::class_<PatchEmbedding>(m, "PatchEmbedding")
      .def(py::init([](const F32Array& kernel, const F32Array& bias, double norm_mean,
                       double norm_std) {
             if (kernel.ndim() != 4 || kernel.shape(1) != 3 || kernel.shape(2) != kernel.shape(3)) {
               throw py::value_error("kernel must have shape (D, 3, P, P)");
             }
             const auto dim = static_cast<std::size_t>(kernel.shape(0));
             const auto patch = static_cast<std::size_t>(kernel.shape(2));
             return PatchEmbedding::from_conv_layout(
                 {kernel.data(), static_cast<std::size_t>(kernel.size())},
                 {bias.data(), static_cast<std::size_t>(bias.size())}, patch, dim,
                 Normalization::uniform(norm_mean, norm_std));
           }),
           py::arg("kernel"), py::arg("bias"), py::arg("norm_mean") = 0.5,
           py::arg("norm_std") = 0.5)
      .def_property_readonly("patch_size", &PatchEmbedding::patch_size)
      .def_property_readonly("dim", &PatchEmbedding::dim)
      .def("kernel",
           [](const PatchEmbedding& pe) {
             const auto p = pe.patch_size();
             F32Array out({pe.dim(), std::size_t{3}, p, p});
             auto w = pe.to_conv_layout();
             std::memcpy(out.mutable_data(), w.data(), w.size() * sizeof(float));
             return out;
           })
      .def(
          "forward",
          [](const PatchEmbedding& pe, const U8Array& img, unsigned threads) {
            TokenGrid g = embed_forward(pe, image_from_array(img), threads);
            py::array_t<double> out({g.rows, g.cols, g.dim});
            std::memcpy(out.mutable_data(), g.values.data(), g.values.size() * sizeof(double));
            return out;
          },
          py::arg("image"), py::arg("threads") = 1)
      .def(
          "adapt", [](const PatchEmbedding& pe, const SecretKey& key) { return adapt_embedding(pe, key); },
          py::arg("key"));

  m.def(
      "verify_equivariance",
      [](const PatchEmbedding& pe, const SecretKey& key, const U8Array& img, double tol) {
        return report_dict(verify_equivariance(pe, key, image_from_array(img), tol));
      },
      py::arg("embedding"), py::arg("key"), py::arg("image"), py::arg("tol") = 1e-9);

  m.def(
      "inspect_archive",
      [](const py::bytes& data) {
        TensorArchive a = read_archive(bytes_of(data));
        py::list tensors;
        for (const auto& r : a.records) {
          py::dict t;
          t["name"] = r.name;
          t["dtype"] = std::string(dtype_name(r.dtype));
          t["shape"] = r.shape;
          t["nbytes"] = r.data.size();
          tensors.append(t);
        }
        py::dict out;
        out["tensors"] = tensors;
        out["metadata"] = a.metadata;
        return out;
      },
      py::arg("data"));
  m.def(
      "canonicalize_archive",
      [](const py::bytes& data) { return to_bytes(write_archive(read_archive(bytes_of(data)))); },
      py::arg("data"), "Re-serialize an archive in canonical form");
  m.def(
      "adapt_archive",
      [](const py::bytes& data, const SecretKey& key, const std::string& weight_name,
         const std::string& bias_name, std::optional<std::size_t> patch_size) {
        TensorArchive a = read_archive(bytes_of(data));
        return to_bytes(write_archive(
            adapt_archive(a, key, {weight_name, bias_name}, optional_patch(patch_size))));
      },
      py::arg("data"), py::arg("key"), py::arg("weight_name") = std::string(kDefaultWeightName),
      py::arg("bias_name") = std::string(kDefaultBiasName), py::arg("patch_size") = py::none());

  m.def(
      "segmentation_metrics",
      [](const std::vector<U8Array>& gt, const std::vector<U8Array>& pred, std::size_t classes,
         unsigned ignore) {
        if (gt.size() != pred.size()) throw py::value_error("gt and pred lists differ in length");
        if (ignore > 255) throw py::value_error("ignore must be in 0..255");
        ConfusionMatrix cm(classes, static_cast<std::uint8_t>(ignore));
        for (std::size_t i = 0; i < gt.size(); ++i) {
          cm.accumulate(labels_from_array(gt[i]), labels_from_array(pred[i]));
        }
        MetricsReport r = compute(cm);
        py::dict out;
        out["aAcc"] = r.aacc;
        out["mAcc"] = r.macc;
        out["mIoU"] = r.miou;
        out["per_class_iou"] = r.per_class_iou;
        out["per_class_acc"] = r.per_class_acc;
        return out;
      },
      py::arg("gt"), py::arg("pred"), py::arg("classes"), py::arg("ignore") = 255);
}
