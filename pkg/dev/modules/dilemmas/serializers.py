from rest_framework import serializers

from .domain import BiasType, ComplexityTier, DecisionChoice


class DilemmaPairSerializer(serializers.Serializer):
    """Schema of one record in a dataset JSON document."""

    pair_id = serializers.CharField()
    bias_type = serializers.ChoiceField(choices=BiasType.choices)
    expected_decision = serializers.ChoiceField(
        choices=[DecisionChoice.OPTION_A.value, DecisionChoice.OPTION_B.value]
    )
    unbiased_text = serializers.CharField(trim_whitespace=False)
    biased_text = serializers.CharField(trim_whitespace=False)
    shared_axioms = serializers.CharField(allow_blank=True, trim_whitespace=False)
    unbiased_program = serializers.CharField(allow_blank=True, trim_whitespace=False)
    biased_program = serializers.CharField(allow_blank=True, trim_whitespace=False)
    inference_steps = serializers.IntegerField(min_value=0, required=False, allow_null=True)
    tier = serializers.ChoiceField(choices=ComplexityTier.choices, required=False, allow_null=True)

    @classmethod
    def known_fields(cls):
        return set(cls().fields)
