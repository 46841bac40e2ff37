#include <math.h>
#include <stdio.h>
#include "spd_emg.h"

#define CHECK(expr)                                                        \
    do {                                                                   \
        if ((expr) != SPD_STATUS_OK) {                                     \
            fprintf(stderr, "%s failed: %s\n", #expr, spd_last_error_message()); \
            return 1;                                                      \
        }                                                                  \
    } while (0)

int main(void) {
    const double a_entries[4] = {1.0, 0.0, 0.0, 1.0};
    const double b_entries[4] = {M_E * M_E, 0.0, 0.0, 1.0};
    const double bad[4] = {1.0, 2.0, 2.0, 1.0};
    SpdPoint *a = NULL, *b = NULL, *c = NULL;
    double d = 0.0;

    CHECK(spd_point_from_spd(2, a_entries, &a));
    CHECK(spd_point_from_spd(2, b_entries, &b));
    CHECK(spd_geodesic_distance(a, b, &d));
    if (fabs(d - 1.0) > 1e-12) {
        fprintf(stderr, "distance %.15f\n", d);
        return 1;
    }
    if (spd_point_from_spd(2, bad, &c) != SPD_STATUS_DATA_ERROR || c != NULL) {
        fprintf(stderr, "indefinite input accepted\n");
        return 1;
    }

    const SpdPoint *pts[2] = {a, b};
    const uint32_t labels[2] = {0, 1};
    SpdModel *model = NULL;
    uint32_t label = 9;
    CHECK(spd_mdm_train(pts, labels, 2, &model));
    CHECK(spd_model_predict(model, b, &label));
    if (label != 1) {
        fprintf(stderr, "predicted %u\n", label);
        return 1;
    }

    spd_model_free(model);
    spd_point_free(a);
    spd_point_free(b);
    printf("ok %s\n", spd_version());
    return 0;
}
