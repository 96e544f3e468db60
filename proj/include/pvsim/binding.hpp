#pragma once

#include <cstdint>
#include <unordered_map>

#include "pvsim/addr.hpp"
#include "pvsim/errors.hpp"

namespace pvsim {

// Lifecycle of a guest frame's host backing. PreBound means the host page is
// reserved (typically while the guest page sits in a per-CPU cache) but not
// yet chargeable to any allocation; Bound means live.
enum class bind_state : uint8_t { unbound, pre_bound, bound };

std::string_view bind_state_name(bind_state s);

class binding_table {
  public:
    bind_state state(gpa_t g) const {
        auto it = map_.find(g.n);
        return it == map_.end() ? bind_state::unbound : it->second.state;
    }

    hpa_t hpa(gpa_t g) const {
        auto it = map_.find(g.n);
        if (it == map_.end()) fail(errc::bad_state, "gpa " + std::to_string(g.n) + " is unbound");
        return it->second.hpa;
    }

    void set_pre_bound(gpa_t g, hpa_t h) {
        if (state(g) != bind_state::unbound)
            fail(errc::bad_state, "gpa " + std::to_string(g.n) + " already has host backing");
        map_[g.n] = {bind_state::pre_bound, h};
        pre_bound_++;
    }

    void promote(gpa_t g) {
        auto it = map_.find(g.n);
        if (it == map_.end() || it->second.state != bind_state::pre_bound)
            fail(errc::bad_state, "gpa " + std::to_string(g.n) + " is not pre-bound");
        it->second.state = bind_state::bound;
        pre_bound_--;
        bound_++;
    }

    // Returns the released host frame.
    hpa_t clear(gpa_t g) {
        auto it = map_.find(g.n);
        if (it == map_.end()) fail(errc::bad_state, "unbinding unbound gpa " + std::to_string(g.n));
        hpa_t h = it->second.hpa;
        (it->second.state == bind_state::pre_bound ? pre_bound_ : bound_)--;
        map_.erase(it);
        return h;
    }

    uint64_t pre_bound_count() const { return pre_bound_; }
    uint64_t bound_count() const { return bound_; }
    uint64_t host_pages_held() const { return pre_bound_ + bound_; }
    size_t size() const { return map_.size(); }

  private:
    struct binding {
        bind_state state;
        hpa_t hpa;
    };
    std::unordered_map<uint64_t, binding> map_;
    uint64_t pre_bound_ = 0;
    uint64_t bound_ = 0;
};

}  // namespace pvsim
