#include <math.h>
#include <stdio.h>
#include "gendyn.h"

static int fail(const char *what) {
    const char *msg = gendyn_last_error_message();
    fprintf(stderr, "%s: %s\n", what, msg ? msg : "(no message)");
    return 1;
}

int main(void) {
    double shat;
    if (gendyn_shat_of_sbar(3.0, 0.5, 1.0, &shat) != GENDYN_STATUS_OK) return fail("shat");
    if (fabs(shat - sqrt(95.0) / 3.0) > 1e-12) return fail("shat value");

    double snrs[1] = {3.0};
    GendynTheory *model = NULL;
    if (gendyn_theory_new(snrs, 1, 100, 50, 0, 0, 1e-3, 3, &model) != GENDYN_STATUS_OK) return fail("theory");
    double t_opt, eps_min;
    if (gendyn_theory_optimal_stopping(model, &t_opt, &eps_min) != GENDYN_STATUS_OK) return fail("stopping");
    gendyn_theory_free(model);

    double bad;
    if (gendyn_sbar_of_shat(0.5, 0.5, 1.0, &bad) != GENDYN_STATUS_NOT_DETECTABLE) return fail("below edge");
    if (gendyn_last_error_message() == NULL) return fail("missing message");

    printf("%s %.6f %.6f\n", gendyn_version(), t_opt, eps_min);
    return 0;
}
