#pragma once

#include <span>

#include "pvsim/addr.hpp"

namespace pvsim {

// Callouts the guest page allocator makes at binding-relevant moments. The
// intent-driven backend plugs its pager in here; the reactive backends run
// the allocator with no hooks and pay for backing lazily at fault time.
struct allocator_hooks {
    virtual ~allocator_hooks() = default;

    // One batched hypercall each; must be all-or-nothing.
    virtual void bind_batch(std::span<const gpa_t> gpas) = 0;
    virtual void unbind_batch(std::span<const gpa_t> gpas) = 0;

    // A page left the allocator for real use (hot path, no hypercall).
    virtual void on_alloc(gpa_t gpa) = 0;
};

}  // namespace pvsim
