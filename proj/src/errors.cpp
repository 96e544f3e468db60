#include "pvsim/errors.hpp"

#include "pvsim/page_table.hpp"

namespace pvsim {

std::string_view errc_name(errc c) {
    switch (c) {
        case errc::invalid_entry: return "invalid_entry";
        case errc::unaligned_huge: return "unaligned_huge";
        case errc::overlapping_huge: return "overlapping_huge";
        case errc::double_registration: return "double_registration";
        case errc::out_of_guest_memory: return "out_of_guest_memory";
        case errc::out_of_host_memory: return "out_of_host_memory";
        case errc::double_free: return "double_free";
        case errc::bad_state: return "bad_state";
        case errc::unbound_gpa: return "unbound_gpa";
        case errc::absent_entry: return "absent_entry";
        case errc::wrong_domain: return "wrong_domain";
        case errc::context_missing: return "context_missing";
        case errc::migration_in_gate: return "migration_in_gate";
        case errc::empty_series: return "empty_series";
        case errc::unknown_profile: return "unknown_profile";
        case errc::invalid_params: return "invalid_params";
        case errc::bad_access: return "bad_access";
        case errc::io: return "io";
        case errc::internal: return "internal";
    }
    return "unknown";
}

std::string_view table_role_name(table_role r) {
    switch (r) {
        case table_role::guest_user_pt: return "guest_user_pt";
        case table_role::direct_map_pt: return "direct_map_pt";
        case table_role::user_spt: return "user_spt";
        case table_role::direct_map_spt: return "direct_map_spt";
        case table_role::second_stage: return "second_stage";
    }
    return "unknown";
}

}  // namespace pvsim
