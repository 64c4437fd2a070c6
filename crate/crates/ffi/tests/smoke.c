#include <math.h>
#include <stdio.h>
#include "kplab.h"

#define CHECK(call)                                                                \
    do {                                                                           \
        KplabStatus st_ = (call);                                                  \
        if (st_ != KPLAB_STATUS_OK) {                                              \
            const char *m_ = kplab_last_error_message();                           \
            fprintf(stderr, "%s failed: %s (%s)\n", #call, kplab_status_string(st_), \
                    m_ ? m_ : "");                                                 \
            return 1;                                                              \
        }                                                                          \
    } while (0)

int main(void) {
    const double src[] = {-1.0, 1.0};
    const double dst[] = {-0.5, 0.5};
    KplabMixture *m = NULL;
    CHECK(kplab_mixture_new(1, 2, src, NULL, 1.0, &m));
    double h = 0.0, se = 0.0;
    CHECK(kplab_mixture_renyi(m, 2.0, NULL, &h, &se));
    kplab_mixture_free(m);

    KplabPair *p = NULL;
    CHECK(kplab_pair_new(1, 2, src, dst, NULL, &p));
    KplabGap g;
    CHECK(kplab_kp_gap(p, 2.0, 1.0, NULL, &g));
    kplab_pair_free(p);

    const double bits[] = {-1.0, 1.0};
    KplabCapacity c;
    double w[2];
    CHECK(kplab_capacity(1, 2, bits, 1.0, 1e-6, 500, NULL, w, &c));

    if (kplab_pair_new(1, 2, dst, src, NULL, &p) != KPLAB_STATUS_NOT_A_CONTRACTION) {
        fprintf(stderr, "expansion accepted\n");
        return 1;
    }
    printf("version=%s h2=%.12f gap=%.12f verdict=%d capacity=%.12f\n", kplab_version(), h, g.gap, g.verdict,
           c.capacity);
    return g.gap >= 0.0 && g.verdict == KPLAB_VERDICT_HOLDS && fabs(w[0] - 0.5) < 1e-6 ? 0 : 1;
}
