/** Wire types mirroring the review service JSON responses. */
export const CATEGORIES_BY_ORIGIN = {
    discordant: ["label_error", "model_error", "ambiguous"],
    agreement_sample: ["label_error", "ambiguous", "confirmed_correct"],
};
