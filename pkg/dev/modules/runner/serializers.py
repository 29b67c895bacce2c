from rest_framework import serializers


class RecommendationPairSerializer(serializers.Serializer):
    biased = serializers.ChoiceField(choices=["option_a", "option_b", "undetermined"])
    unbiased = serializers.ChoiceField(choices=["option_a", "option_b", "undetermined"])


class HumanLabelSerializer(serializers.Serializer):
    """One labelled (model, strategy, pair) of the open-ended study."""

    model_id = serializers.CharField()
    strategy_id = serializers.CharField()
    pair_id = serializers.CharField()
    coder_1 = RecommendationPairSerializer()
    coder_2 = RecommendationPairSerializer()
    adjudicator = RecommendationPairSerializer(required=False, allow_null=True, default=None)
