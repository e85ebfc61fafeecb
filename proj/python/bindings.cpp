#include "stcert/backend_spec.hpp"
#include "stcert/certifier.hpp"
#include "stcert/error.hpp"
#include "stcert/evaluation.hpp"
#include "stcert/fake_world.hpp"
#include "stcert/image.hpp"
#include "stcert/taxonomy.hpp"

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <json.hpp>

namespace py = pybind11;
using nlohmann::json;

namespace
{

using Box = std::tuple<int, int, int, int>;

py::object to_py(const json& j)
{
    return py::module_::import("json").attr("loads")(j.dump());
}

json from_py(const py::object& o)
{
    return json::parse(py::module_::import("json").attr("dumps")(o).cast<std::string>());
}

stcert::ImageBuf image_from(const py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>& a)
{
    if (a.ndim() != 3 || a.shape(2) != 3)
        throw py::value_error("image must be an HxWx3 uint8 array");
    const auto h = static_cast<int>(a.shape(0));
    const auto w = static_cast<int>(a.shape(1));
    std::vector<std::uint8_t> pixels(a.data(), a.data() + a.size());
    return stcert::ImageBuf(w, h, std::move(pixels));
}

py::array_t<std::uint8_t> image_to(const stcert::ImageBuf& img)
{
    py::array_t<std::uint8_t> out({img.height(), img.width(), 3});
    std::copy(img.data().begin(), img.data().end(), out.mutable_data());
    return out;
}

stcert::BitMask mask_from(const py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>& a)
{
    if (a.ndim() != 2)
        throw py::value_error("mask must be an HxW array");
    stcert::BitMask m(static_cast<int>(a.shape(1)), static_cast<int>(a.shape(0)));
    auto r = a.unchecked<2>();
    for (py::ssize_t y = 0; y < a.shape(0); ++y)
        for (py::ssize_t x = 0; x < a.shape(1); ++x)
            m.set(static_cast<int>(x), static_cast<int>(y), r(y, x) != 0);
    return m;
}

py::array_t<std::uint8_t> mask_to(const stcert::BitMask& m)
{
    py::array_t<std::uint8_t> out({m.height(), m.width()});
    std::copy(m.data().begin(), m.data().end(), out.mutable_data());
    return out;
}

Box box_to(const stcert::BBox& b)
{
    return {b.x0, b.y0, b.x1, b.y1};
}

stcert::BBox box_from(const Box& b)
{
    return {std::get<0>(b), std::get<1>(b), std::get<2>(b), std::get<3>(b)};
}

stcert::CertConfig config_from(const py::object& o)
{
    return o.is_none() ? stcert::CertConfig{} : stcert::CertConfig::from_json(from_py(o));
}

// Lets Python objects act as backends.
class PyClassifier : public stcert::ClassifierBackend
{
public:
    stcert::Prediction classify(const stcert::ImageBuf& image) override
    {
        py::gil_scoped_acquire gil;
        py::function fn = py::get_override(static_cast<const stcert::ClassifierBackend*>(this), "classify");
        if (!fn)
            throw stcert::BackendError("classify() not implemented");
        auto result = fn(image_to(image)).cast<std::pair<int, double>>();
        return {result.first, result.second};
    }
    stcert::BackendInfo info() const override
    {
        py::gil_scoped_acquire gil;
        py::function fn = py::get_override(static_cast<const stcert::ClassifierBackend*>(this), "info");
        if (!fn)
            return {"python", "classifier", 0, false};
        auto d = fn().cast<py::dict>();
        return {d.contains("name") ? d["name"].cast<std::string>() : "python", "classifier",
                d.contains("class_count") ? d["class_count"].cast<int>() : 0,
                d.contains("thread_safe") && d["thread_safe"].cast<bool>()};
    }
};

class PySegmenter : public stcert::SegmenterBackend
{
public:
    std::vector<stcert::Detection> ground(const stcert::ImageBuf& image, std::string_view prompt, double box_threshold,
                                          double text_threshold) override
    {
        py::gil_scoped_acquire gil;
        py::function fn = py::get_override(static_cast<const stcert::SegmenterBackend*>(this), "ground");
        if (!fn)
            throw stcert::BackendError("ground() not implemented");
        std::vector<stcert::Detection> out;
        for (auto item : fn(image_to(image), std::string(prompt), box_threshold, text_threshold))
        {
            auto d = item.cast<py::dict>();
            stcert::Detection det;
            det.mask = mask_from(d["mask"].cast<py::array_t<std::uint8_t>>());
            det.box = d.contains("box") ? box_from(d["box"].cast<Box>()) : stcert::tight_bbox(det.mask);
            det.score = d.contains("score") ? d["score"].cast<double>() : 1.0;
            if (det.score >= box_threshold)
                out.push_back(std::move(det));
        }
        return out;
    }
    stcert::BackendInfo info() const override
    {
        py::gil_scoped_acquire gil;
        py::function fn = py::get_override(static_cast<const stcert::SegmenterBackend*>(this), "info");
        if (!fn)
            return {"python", "segmenter", 0, false};
        auto d = fn().cast<py::dict>();
        return {d.contains("name") ? d["name"].cast<std::string>() : "python", "segmenter", 0,
                d.contains("thread_safe") && d["thread_safe"].cast<bool>()};
    }
};

py::dict info_dict(const stcert::BackendInfo& i)
{
    py::dict d;
    d["name"] = i.name;
    d["kind"] = i.kind;
    d["class_count"] = i.class_count;
    d["thread_safe"] = i.thread_safe;
    return d;
}

} // namespace

PYBIND11_MODULE(_stcert, m)
{
    m.doc() = "Second-thought certification core";

    py::register_exception<stcert::Error>(m, "Error", PyExc_RuntimeError);

    py::class_<stcert::Taxonomy>(m, "Taxonomy")
        .def_static("load", [](const std::string& path) { return stcert::Taxonomy::load(path); })
        .def_static("from_dict", [](const py::object& o) { return stcert::Taxonomy::from_json(from_py(o)); })
        .def("to_dict", [](const stcert::Taxonomy& t) { return to_py(t.to_json()); })
        .def("__len__", &stcert::Taxonomy::size)
        .def("lemma", [](const stcert::Taxonomy& t, int id) { return t.entry(id).lemma; })
        .def("synset", [](const stcert::Taxonomy& t, int id) { return t.entry(id).synset; })
        .def("find_synset", &stcert::Taxonomy::find_synset)
        .def("prompt_for", &stcert::Taxonomy::prompt_for)
        .def("datasets", [](const stcert::Taxonomy& t) {
            std::vector<std::string> names;
            for (const auto& [n, _] : t.datasets())
                names.push_back(n);
            return names;
        })
        .def("superclass_of", &stcert::Taxonomy::superclass_of)
        .def("error_kind",
             [](const stcert::Taxonomy& t, int pred, int truth, const std::string& ds) {
                 return std::string(stcert::to_string(t.error_kind(pred, truth, ds)));
             })
        .def("path_similarity", &stcert::Taxonomy::path_similarity);

    m.def("apply_mask", [](const py::array_t<std::uint8_t>& img, const py::array_t<std::uint8_t>& mask,
                           std::array<std::uint8_t, 3> blank) {
        return image_to(stcert::apply_mask(image_from(img), mask_from(mask), stcert::BlankFill{blank}));
    }, py::arg("image"), py::arg("mask"), py::arg("blank") = std::array<std::uint8_t, 3>{0, 0, 0});
    m.def("tight_bbox", [](const py::array_t<std::uint8_t>& mask) { return box_to(stcert::tight_bbox(mask_from(mask))); });
    m.def("expand_box", [](const Box& b, int level, int w, int h, double step) {
        return box_to(stcert::expand_box(box_from(b), level, w, h, step));
    }, py::arg("box"), py::arg("level"), py::arg("width"), py::arg("height"), py::arg("step") = stcert::kDefaultContextStep);
    m.def("crop_resize", [](const py::array_t<std::uint8_t>& img, const Box& b, int target) {
        return image_to(stcert::crop_resize(image_from(img), box_from(b), target));
    }, py::arg("image"), py::arg("box"), py::arg("target") = stcert::kDefaultTargetSize);
    m.def("rle_encode", [](const py::array_t<std::uint8_t>& mask) { return stcert::rle_encode(mask_from(mask)); });
    m.def("rle_decode", [](const std::vector<std::uint32_t>& runs, int w, int h) {
        return mask_to(stcert::rle_decode(runs, w, h));
    });

    py::class_<stcert::ClassifierBackend, PyClassifier, std::shared_ptr<stcert::ClassifierBackend>>(m, "ClassifierBackend")
        .def(py::init<>())
        .def("classify", [](stcert::ClassifierBackend& b, const py::array_t<std::uint8_t>& img) {
            auto p = b.classify(image_from(img));
            return std::make_pair(p.class_id, p.confidence);
        })
        .def("info", [](const stcert::ClassifierBackend& b) { return info_dict(b.info()); });

    py::class_<stcert::SegmenterBackend, PySegmenter, std::shared_ptr<stcert::SegmenterBackend>>(m, "SegmenterBackend")
        .def(py::init<>())
        .def("ground", [](stcert::SegmenterBackend& s, const py::array_t<std::uint8_t>& img, const std::string& prompt,
                          double box_threshold, double text_threshold) {
            py::list out;
            for (const auto& d : s.ground(image_from(img), prompt, box_threshold, text_threshold))
            {
                py::dict jd;
                jd["box"] = box_to(d.box);
                jd["mask"] = mask_to(d.mask);
                jd["score"] = d.score;
                out.append(jd);
            }
            return out;
        }, py::arg("image"), py::arg("prompt"), py::arg("box_threshold") = stcert::kDefaultBoxThreshold,
           py::arg("text_threshold") = stcert::kDefaultTextThreshold)
        .def("info", [](const stcert::SegmenterBackend& s) { return info_dict(s.info()); });

    py::class_<stcert::FakeClassifier, stcert::ClassifierBackend, std::shared_ptr<stcert::FakeClassifier>>(m, "FakeClassifier")
        .def(py::init([](const std::string& path) {
            return std::make_shared<stcert::FakeClassifier>(stcert::FakeWorldSpec::load(path));
        }))
        .def_static("from_dict", [](const py::object& o) {
            return std::make_shared<stcert::FakeClassifier>(stcert::FakeWorldSpec::from_json(from_py(o)));
        });
    py::class_<stcert::FakeSegmenter, stcert::SegmenterBackend, std::shared_ptr<stcert::FakeSegmenter>>(m, "FakeSegmenter")
        .def(py::init([](const std::string& path) {
            return std::make_shared<stcert::FakeSegmenter>(stcert::FakeWorldSpec::load(path));
        }))
        .def_static("from_dict", [](const py::object& o) {
            return std::make_shared<stcert::FakeSegmenter>(stcert::FakeWorldSpec::from_json(from_py(o)));
        });

    m.def("make_classifier", &stcert::make_classifier, "Backend from a fake:/proc: spec string");
    m.def("make_segmenter", &stcert::make_segmenter, "Backend from a fake:/proc: spec string");

    m.def("render_world", [](const py::object& spec, const stcert::Taxonomy& t, const std::string& root) {
        stcert::render_world(stcert::FakeWorldSpec::from_json(from_py(spec)), t, root);
    });

    m.def("certify", [](const py::array_t<std::uint8_t>& img, std::shared_ptr<stcert::ClassifierBackend> first,
                        std::shared_ptr<stcert::ClassifierBackend> second, std::shared_ptr<stcert::SegmenterBackend> seg,
                        const stcert::Taxonomy& t, const py::object& config) {
        const auto image = image_from(img);
        const auto cfg = config_from(config);
        stcert::CertifiedPrediction cp;
        {
            py::gil_scoped_release release;
            cp = stcert::certify(image, *first, second ? *second : *first, *seg, t, cfg);
        }
        return to_py(stcert::to_json(cp, &t));
    }, py::arg("image"), py::arg("first"), py::arg("second"), py::arg("segmenter"), py::arg("taxonomy"),
       py::arg("config") = py::none());

    m.def("run_dataset", [](const std::string& root, std::shared_ptr<stcert::ClassifierBackend> first,
                            std::shared_ptr<stcert::ClassifierBackend> second,
                            std::shared_ptr<stcert::SegmenterBackend> seg, const stcert::Taxonomy& t,
                            const py::object& config, std::uint64_t seed, int workers, bool adversarial) {
        const auto cfg = config_from(config);
        std::vector<stcert::TrialRecord> log;
        {
            py::gil_scoped_release release;
            log = stcert::run_dataset(root, *first, second ? *second : *first, *seg, t, cfg,
                                      stcert::RunOptions{seed, workers, adversarial});
        }
        py::list out;
        for (const auto& r : log)
            out.append(to_py(r.to_json()));
        return out;
    }, py::arg("root"), py::arg("first"), py::arg("second"), py::arg("segmenter"), py::arg("taxonomy"),
       py::arg("config") = py::none(), py::arg("seed") = 0, py::arg("workers") = 1, py::arg("adversarial") = false);

    auto records_from = [](const py::list& records) {
        std::vector<stcert::TrialRecord> log;
        for (auto r : records)
            log.push_back(stcert::TrialRecord::from_json(from_py(py::reinterpret_borrow<py::object>(r))));
        return log;
    };
    m.def("summarize", [records_from](const py::list& records) {
        return to_py(stcert::summarize(records_from(records)).to_json());
    });
    m.def("adversarial_summary", [records_from](const py::list& records) {
        return to_py(stcert::adversarial_summary(records_from(records)).to_json());
    });
}
