#include "pvsim/host_frames.hpp"

#include <string>

#include "pvsim/errors.hpp"

namespace pvsim {

host_frame_allocator::host_frame_allocator(uint64_t capacity_pages)
    : buddy_(capacity_pages, 10), in_use_(capacity_pages, false) {}

hpa_t host_frame_allocator::alloc() { return alloc_block(0); }

hpa_t host_frame_allocator::alloc_block(unsigned order) {
    auto s = buddy_.alloc(order);
    if (!s) fail(errc::out_of_host_memory,
                 "no host block of order " + std::to_string(order));
    for (uint64_t i = 0; i < (uint64_t(1) << order); i++) {
        if (in_use_[*s + i]) fail(errc::internal, "host frame handed out twice");
        in_use_[*s + i] = true;
    }
    return hpa_t(*s);
}

void host_frame_allocator::free(hpa_t p) { free_block(p, 0); }

void host_frame_allocator::free_block(hpa_t p, unsigned order) {
    for (uint64_t i = 0; i < (uint64_t(1) << order); i++) {
        if (p.n + i >= in_use_.size() || !in_use_[p.n + i])
            fail(errc::double_free, "host frame " + std::to_string(p.n + i) + " not in use");
        in_use_[p.n + i] = false;
    }
    buddy_.free(p.n, order);
}

}  // namespace pvsim
