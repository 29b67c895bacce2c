import re

from rest_framework import serializers


class FeatureSerializer(serializers.Serializer):
    feature_id = serializers.SlugField()
    display_name = serializers.CharField()
    patterns = serializers.ListField(child=serializers.CharField(trim_whitespace=False), allow_empty=False)
    category = serializers.ChoiceField(choices=["topical", "stance"])

    def validate_patterns(self, value):
        for pattern in value:
            try:
                re.compile(pattern, re.IGNORECASE)
            except re.error as exc:
                raise serializers.ValidationError(f"{pattern!r} does not compile: {exc}") from exc
        return value


class CodebookSerializer(serializers.Serializer):
    features = FeatureSerializer(many=True, allow_empty=False)

    def validate_features(self, value):
        ids = [feature["feature_id"] for feature in value]
        duplicates = sorted({feature_id for feature_id in ids if ids.count(feature_id) > 1})
        if duplicates:
            raise serializers.ValidationError(f"duplicate feature ids: {', '.join(duplicates)}")
        return value
