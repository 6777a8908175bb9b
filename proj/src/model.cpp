#include "flex/model.hpp"

#include <fstream>

#include <nlohmann/json.hpp>

#include "flex/errors.hpp"
#include "flex/rng.hpp"

namespace flex {

namespace {

void require(bool cond, const char* msg) {
    if (!cond) throw DimensionMismatch(msg);
}

} // namespace

const StateSpaceModel& validate_model(const StateSpaceModel& m, const NoiseSpec& noise) {
    const int nx = m.nx(), ny = m.ny(), np = m.np(), nd = m.nd();
    require(m.A.rows() == m.A.cols(), "A must be square");
    require(nx >= 1 && ny >= 1 && np >= 1 && nd >= 1, "empty dimension");
    require(m.B_d.rows() == nx && m.B_p.rows() == nx, "B row count != nx");
    require(m.C.cols() == nx, "C column count != nx");
    require(m.D_d.rows() == ny && m.D_d.cols() == nd, "D_d shape mismatch");
    require(m.D_p.rows() == ny && m.D_p.cols() == np, "D_p shape mismatch");
    require(noise.Sigma_w.rows() == nx && noise.Sigma_w.cols() == nx,
            "Sigma_w shape mismatch");
    require(noise.Sigma_v.rows() == ny && noise.Sigma_v.cols() == ny,
            "Sigma_v shape mismatch");
    if (!(m.dt > 0.0)) throw DimensionMismatch("dt must be positive");

    double rho = spectral_radius(m.A);
    if (!(rho < 1.0))
        throw UnstableModel("spectral radius of A is " + std::to_string(rho));

    check_psd(noise.Sigma_w, "Sigma_w");
    check_psd(noise.Sigma_v, "Sigma_v");
    return m;
}

SyntheticBuilding generate_synthetic_building(std::uint64_t seed, int ny,
                                              double coupling, double noise_scale) {
    if (ny < 1) throw DimensionMismatch("ny must be >= 1");
    Rng rng(mix_seed(seed, 0xb0111d1u));

    const int nx = ny + 1;  // rooms + one envelope/mass state
    const int np = ny;      // one heating input per room
    const int nd = 2;       // ambient temperature, solar irradiance
    const double dt = 1.0;

    // Exchange rates per hour. L has nonpositive diagonal and nonnegative
    // couplings; ambient leakage keeps A = I + dt*L strictly stable.
    Mat L = Mat::Zero(nx, nx);
    Vec leak_out(nx);
    for (int i = 0; i < ny; ++i) {
        double to_ambient = rng.uniform(0.012, 0.032);  // room time constants of a few days
        double to_mass = rng.uniform(0.08, 0.20);
        leak_out[i] = to_ambient;
        L(i, i) -= to_ambient + to_mass;
        L(i, ny) += to_mass;
        L(ny, i) += to_mass * rng.uniform(0.15, 0.3);  // mass has larger capacitance
        L(ny, ny) -= L(ny, i);
        if (i + 1 < ny) {
            double nb = coupling * rng.uniform(0.02, 0.06);
            L(i, i + 1) += nb;
            L(i + 1, i) += nb;
            L(i, i) -= nb;
            L(i + 1, i + 1) -= nb;
        }
    }
    double mass_leak = rng.uniform(0.006, 0.015);
    leak_out[ny] = mass_leak;
    L(ny, ny) -= mass_leak;

    // Scale L so the spectral radius lands in [0.90, 0.995].
    double alpha = 1.0;
    Mat A;
    for (int it = 0; it < 40; ++it) {
        A = Mat::Identity(nx, nx) + dt * alpha * L;
        double rho = spectral_radius(A);
        if (rho > 0.995) alpha *= 1.25;
        else if (rho < 0.90) alpha *= 0.8;
        else break;
    }

    Mat B_d = Mat::Zero(nx, nd);
    for (int i = 0; i < nx; ++i) {
        B_d(i, 0) = dt * alpha * leak_out[i];            // ambient temperature
        B_d(i, 1) = dt * rng.uniform(0.3, 1.2) * (i < ny ? 1.0 : 0.25);  // solar
    }

    Mat B_p = Mat::Zero(nx, np);
    for (int i = 0; i < ny; ++i) {
        B_p(i, i) = dt * rng.uniform(0.8, 1.6);  // degC per kWh into own room
        B_p(ny, i) = 0.12 * B_p(i, i);
    }

    Mat C = Mat::Zero(ny, nx);
    C.leftCols(ny).setIdentity();
    Mat D_d = Mat::Zero(ny, nd);
    Mat D_p = Mat::Zero(ny, np);

    // Noise shapes, then scale so that the room-averaged 1-step output error
    // std and the long-horizon std land in the target bands. The 1-step error
    // only sees the room noise (C picks room states), while the long-run error
    // accumulates through the slow mass mode; growing the mass noise share
    // separates the two scales until both targets fit.
    Vec wshape(nx);
    for (int i = 0; i < ny; ++i) wshape[i] = rng.uniform(0.8, 1.2);
    wshape[ny] = rng.uniform(1.0, 1.5);
    double c1 = 0.0, cinf = 0.0;
    Mat Wsh;
    for (int tries = 0; tries < 24; ++tries) {
        Wsh = wshape.cwiseProduct(wshape).asDiagonal();
        Mat Pinf = discrete_lyapunov(A, Wsh);
        c1 = (C * Wsh * C.transpose()).diagonal().mean();
        cinf = (C * Pinf * C.transpose()).diagonal().mean();
        if (cinf >= 22.0 * c1) break;
        wshape[ny] *= 1.6;
    }

    double t_inf = rng.uniform(0.38, 0.55);
    double ratio = std::sqrt(c1 / cinf);
    double t1 = std::max(rng.uniform(0.08, 0.12), 1.05 * ratio * t_inf);
    double sw2 = (t_inf * t_inf - t1 * t1) / (cinf - c1);
    double sv2 = t1 * t1 - sw2 * c1;

    NoiseSpec noise;
    noise.Sigma_w = noise_scale * noise_scale * sw2 * Wsh;
    noise.Sigma_v = noise_scale * noise_scale * sv2 * Mat::Identity(ny, ny);

    StateSpaceModel model;
    model.A = A;
    model.B_d = B_d;
    model.B_p = B_p;
    model.C = C;
    model.D_d = D_d;
    model.D_p = D_p;
    model.dt = dt;
    for (int i = 0; i < ny; ++i) {
        model.labels.outputs.push_back("room_" + std::to_string(i + 1));
        model.labels.heat_inputs.push_back("heat_room_" + std::to_string(i + 1));
    }
    model.labels.weather_inputs = {"ambient_temp_c", "solar_kw_m2"};

    validate_model(model, noise);
    return {model, noise};
}

namespace {

using nlohmann::json;

json mat_to_json(const Mat& m) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

Mat mat_from_json(const json& j, const char* what) {
    if (!j.is_array() || j.empty())
        throw SchemaError(std::string("matrix field '") + what + "' missing or empty");
    const auto rows = j.size();
    const auto cols = j[0].size();
    Mat m(rows, cols);
    for (std::size_t i = 0; i < rows; ++i) {
        if (j[i].size() != cols)
            throw SchemaError(std::string("ragged matrix in field '") + what + "'");
        for (std::size_t k = 0; k < cols; ++k) m(i, k) = j[i][k].get<double>();
    }
    return m;
}

} // namespace

void save_model_json(const std::string& path, const StateSpaceModel& m,
                     const NoiseSpec& noise) {
    json doc;
    doc["dt_hours"] = m.dt;
    doc["A"] = mat_to_json(m.A);
    doc["B_d"] = mat_to_json(m.B_d);
    doc["B_p"] = mat_to_json(m.B_p);
    doc["C"] = mat_to_json(m.C);
    doc["D_d"] = mat_to_json(m.D_d);
    doc["D_p"] = mat_to_json(m.D_p);
    doc["Sigma_w"] = mat_to_json(noise.Sigma_w);
    doc["Sigma_v"] = mat_to_json(noise.Sigma_v);
    doc["labels"]["outputs"] = m.labels.outputs;
    doc["labels"]["heat_inputs"] = m.labels.heat_inputs;
    doc["labels"]["weather_inputs"] = m.labels.weather_inputs;
    std::ofstream out(path);
    if (!out) throw IoError("cannot write model file: " + path);
    out << doc.dump(1) << "\n";
}

SyntheticBuilding load_model_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read model file: " + path);
    json doc;
    try {
        in >> doc;
    } catch (const std::exception& e) {
        throw ParseError(std::string("invalid model JSON: ") + e.what());
    }
    SyntheticBuilding b;
    b.model.dt = doc.value("dt_hours", 1.0);
    b.model.A = mat_from_json(doc.at("A"), "A");
    b.model.B_d = mat_from_json(doc.at("B_d"), "B_d");
    b.model.B_p = mat_from_json(doc.at("B_p"), "B_p");
    b.model.C = mat_from_json(doc.at("C"), "C");
    b.model.D_d = mat_from_json(doc.at("D_d"), "D_d");
    b.model.D_p = mat_from_json(doc.at("D_p"), "D_p");
    b.noise.Sigma_w = mat_from_json(doc.at("Sigma_w"), "Sigma_w");
    b.noise.Sigma_v = mat_from_json(doc.at("Sigma_v"), "Sigma_v");
    if (doc.contains("labels")) {
        const auto& l = doc["labels"];
        b.model.labels.outputs = l.value("outputs", std::vector<std::string>{});
        b.model.labels.heat_inputs = l.value("heat_inputs", std::vector<std::string>{});
        b.model.labels.weather_inputs = l.value("weather_inputs", std::vector<std::string>{});
    }
    validate_model(b.model, b.noise);
    return b;
}

} // namespace flex
