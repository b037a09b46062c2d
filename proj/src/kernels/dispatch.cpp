#include "kernels_impl.hpp"

#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>

namespace pitchrl::kernels {

namespace {

#define PITCHRL_TABLE(ns, tag, label)                                                   \
    KernelTable {                                                                       \
        tag, label, &ns::dot, &ns::axpy, &ns::gemv, &ns::gemv_t_acc, &ns::ger_acc,      \
            &ns::adam_update, &ns::sgd_update                                           \
    }

const KernelTable kScalar = PITCHRL_TABLE(scalar, Backend::Scalar, "scalar");
#if defined(PITCHRL_HAVE_AVX2)
const KernelTable kAvx2 = PITCHRL_TABLE(avx2, Backend::Avx2, "avx2");
#endif
#if defined(PITCHRL_HAVE_NEON)
const KernelTable kNeon = PITCHRL_TABLE(neon, Backend::Neon, "neon");
#endif

#undef PITCHRL_TABLE

bool cpu_has_avx2() {
#if defined(PITCHRL_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
    __builtin_cpu_init();
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

Backend best_available() {
    if (backend_available(Backend::Avx2)) return Backend::Avx2;
    if (backend_available(Backend::Neon)) return Backend::Neon;
    return Backend::Scalar;
}

Backend initial_backend() {
    if (const char* env = std::getenv("PITCHRL_KERNELS"); env != nullptr && *env != '\0') {
        const Backend requested = parse_backend(env);
        if (!backend_available(requested)) {
            throw std::runtime_error(std::string("PITCHRL_KERNELS=") + env +
                                     " is not available on this machine");
        }
        return requested;
    }
    return best_available();
}

std::atomic<const KernelTable*>& slot() {
    static std::atomic<const KernelTable*> table{&table_for(initial_backend())};
    return table;
}

}  // namespace

const KernelTable& scalar_table() { return kScalar; }

bool backend_available(Backend b) {
    switch (b) {
        case Backend::Scalar:
            return true;
        case Backend::Avx2:
            return cpu_has_avx2();
        case Backend::Neon:
#if defined(PITCHRL_HAVE_NEON)
            return true;
#else
            return false;
#endif
    }
    return false;
}

const KernelTable& table_for(Backend b) {
    if (!backend_available(b)) {
        throw std::invalid_argument("kernel backend '" + std::string(backend_name(b)) +
                                    "' is not available");
    }
    switch (b) {
#if defined(PITCHRL_HAVE_AVX2)
        case Backend::Avx2:
            return kAvx2;
#endif
#if defined(PITCHRL_HAVE_NEON)
        case Backend::Neon:
            return kNeon;
#endif
        default:
            return kScalar;
    }
}

const KernelTable& active() { return *slot().load(std::memory_order_acquire); }

Backend active_backend() { return active().backend; }

void set_active_backend(Backend b) { slot().store(&table_for(b), std::memory_order_release); }

std::string_view backend_name(Backend b) {
    switch (b) {
        case Backend::Scalar:
            return "scalar";
        case Backend::Avx2:
            return "avx2";
        case Backend::Neon:
            return "neon";
    }
    return "unknown";
}

Backend parse_backend(std::string_view name) {
    if (name == "scalar") return Backend::Scalar;
    if (name == "avx2") return Backend::Avx2;
    if (name == "neon") return Backend::Neon;
    throw std::invalid_argument("unknown kernel backend '" + std::string(name) + "'");
}

}  // namespace pitchrl::kernels
