#pragma once

namespace rdm {

// Worker-thread cap. Reads RDM_THREADS once at first use; 1 is the
// deterministic test mode. Every kernel writes disjoint outputs with a fixed
// reduction order, so results do not depend on this value.
int thread_count();
void set_thread_count(int n);

}  // namespace rdm
